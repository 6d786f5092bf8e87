#!/usr/bin/env node
import { runCli } from '../cli.js'

runCli(['extract-descriptors', ...process.argv.slice(2)]).then((code) => {
  process.exitCode = code
})
