/**
 * Command-line front end: `extract-descriptors` and `extract-matches`.
 *
 * Exit codes: 0 on success, 1 on a runtime failure (unreadable media,
 * bad weights, mask mismatch), 2 on a usage error.
 */

import { parseArgs } from 'node:util'

import * as tf from '@tensorflow/tfjs'

import {
  ExtractionConfig,
  DEFAULT_FPS,
  extractDescriptors,
  extractMatchCounts,
} from './extract.js'
import { DEFAULT_CONFIDENCE } from './matcher.js'

const USAGE = `usage: extract-descriptors --input PATH --weights DIR --out FILE [--fps N]
       extract-matches --input PATH --out FILE [--fps N] [--mask PATH|auto|none]
                       [--pairs FILE] [--confidence C]

Turn an image directory or .y4m video into the descriptor and match-count
files the mapping pipeline consumes.  Frame ids are sample indices.

options:
  --input PATH       image directory or uncompressed .y4m video
  --fps N            video sampling rate in frames per second (default ${DEFAULT_FPS})
  --mask SPEC        mask image, "auto" (inscribed circle, default), or "none"
  --weights DIR      layers-model directory (model.json + weight shards)
  --pairs FILE       frame-id pairs to match; default: consecutive pairs
  --confidence C     correspondence confidence cutoff (default ${DEFAULT_CONFIDENCE})
  --gem-power P      generalized-mean pooling power (default 3)
  --out FILE         output path
`

class UsageError extends Error {}

function parseNumber(name: string, raw: string | undefined): number | undefined {
  if (raw === undefined) {
    return undefined
  }
  const value = Number(raw)
  if (!Number.isFinite(value)) {
    throw new UsageError(`--${name} expects a number, got ${JSON.stringify(raw)}`)
  }
  return value
}

function buildConfig(argv: string[]): {
  command: string
  config: ExtractionConfig
} {
  const command = argv[0]
  if (command === undefined || command === '--help' || command === '-h') {
    throw new UsageError(USAGE)
  }
  if (command !== 'extract-descriptors' && command !== 'extract-matches') {
    throw new UsageError(`unknown command ${JSON.stringify(command)}\n${USAGE}`)
  }
  let parsed
  try {
    parsed = parseArgs({
      args: argv.slice(1),
      options: {
        input: { type: 'string' },
        fps: { type: 'string' },
        mask: { type: 'string' },
        weights: { type: 'string' },
        pairs: { type: 'string' },
        confidence: { type: 'string' },
        'gem-power': { type: 'string' },
        out: { type: 'string' },
        help: { type: 'boolean', short: 'h' },
      },
      allowPositionals: false,
    })
  } catch (error) {
    throw new UsageError(`${(error as Error).message}\n${USAGE}`)
  }
  const values = parsed.values
  if (values.help) {
    throw new UsageError(USAGE)
  }
  if (!values.input || !values.out) {
    throw new UsageError(`--input and --out are required\n${USAGE}`)
  }
  if (command === 'extract-descriptors' && !values.weights) {
    throw new UsageError(`extract-descriptors requires --weights\n${USAGE}`)
  }
  const config: ExtractionConfig = {
    input: values.input,
    fps: parseNumber('fps', values.fps) ?? DEFAULT_FPS,
    mask: values.mask,
    weights: values.weights,
    pairs: values.pairs,
    out: values.out,
    confidence: parseNumber('confidence', values.confidence) ?? DEFAULT_CONFIDENCE,
    gemPower: parseNumber('gem-power', values['gem-power']) ?? 3,
  }
  return { command, config }
}

export async function runCli(argv: string[]): Promise<number> {
  let command: string
  let config: ExtractionConfig
  try {
    ;({ command, config } = buildConfig(argv))
  } catch (error) {
    if (error instanceof UsageError) {
      process.stderr.write(`${error.message}\n`)
      return 2
    }
    throw error
  }
  try {
    if (command === 'extract-descriptors') {
      await tf.setBackend('cpu')
      const result = await extractDescriptors(config)
      process.stdout.write(
        `descriptors: ${result.frames} frames -> ${config.out}\n`,
      )
    } else {
      const result = extractMatchCounts(config)
      process.stdout.write(`matches: ${result.pairs} pairs -> ${config.out}\n`)
    }
  } catch (error) {
    process.stderr.write(`error: ${(error as Error).message}\n`)
    return 1
  }
  return 0
}
