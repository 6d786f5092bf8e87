/**
 * The two pipeline operations: descriptor extraction and match-count
 * extraction.  Both read frames through the same sampler, give frame id
 * = sample index, and write only the interchange formats, so their
 * outputs drop straight into the mapping and localization tools.
 */

import { readFileSync } from 'node:fs'

import {
  DescriptorFrame,
  MatchEntry,
  parsePairsFile,
  writeDescriptorFile,
  writeMatchCacheFile,
} from './formats.js'
import { FrameSample, loadFrames } from './frames.js'
import { gemDescriptor, loadBackbone } from './gem.js'
import { DEFAULT_CONFIDENCE, matchCount } from './matcher.js'
import { Mask, resolveMask } from './mask.js'

export interface ExtractionConfig {
  /** image directory or .y4m video */
  input: string
  /** sampling rate for video inputs, frames per second */
  fps: number
  /** mask image path, "auto" for the inscribed circle, "none" */
  mask?: string
  /** layers-model directory holding model.json + weight shards */
  weights?: string
  /** pairs file; omitted = all consecutive pairs */
  pairs?: string
  out: string
  confidence: number
  gemPower: number
}

export const DEFAULT_FPS = 10

export function defaultConfig(input: string, out: string): ExtractionConfig {
  return {
    input,
    fps: DEFAULT_FPS,
    out,
    confidence: DEFAULT_CONFIDENCE,
    gemPower: 3,
  }
}

function checkConfig(config: ExtractionConfig): void {
  if (!(config.fps > 0)) {
    throw new Error(`sampling rate must be positive, got ${config.fps}`)
  }
  if (!(config.confidence >= 0)) {
    throw new Error(`confidence cutoff must be >= 0, got ${config.confidence}`)
  }
}

export interface DescriptorResult {
  frames: number
}

/** Sample frames, run the backbone, write the descriptor file. */
export async function extractDescriptors(
  config: ExtractionConfig,
): Promise<DescriptorResult> {
  checkConfig(config)
  if (!config.weights) {
    throw new Error('descriptor extraction needs --weights')
  }
  const samples = loadFrames(config.input, config.fps)
  const model = await loadBackbone(config.weights)
  const frames: DescriptorFrame[] = samples.map((sample) => ({
    frameId: sample.index,
    descriptor: gemDescriptor(model, sample.image, config.gemPower),
  }))
  writeDescriptorFile(config.out, frames)
  return { frames: frames.length }
}

function framePairs(
  config: ExtractionConfig,
  samples: FrameSample[],
): Array<[number, number]> {
  if (config.pairs) {
    const pairs = parsePairsFile(readFileSync(config.pairs, 'utf8'))
    for (const [a, b] of pairs) {
      if (a >= samples.length || b >= samples.length) {
        throw new Error(
          `pair (${a}, ${b}) refers past the ${samples.length} sampled frames`,
        )
      }
      if (a === b) {
        throw new Error(`pair (${a}, ${b}) is a self-pair`)
      }
    }
    return pairs
  }
  const consecutive: Array<[number, number]> = []
  for (let i = 0; i + 1 < samples.length; i++) {
    consecutive.push([i, i + 1])
  }
  return consecutive
}

export interface MatchResult {
  pairs: number
}

/** Sample frames, count correspondences per pair, write the cache file. */
export function extractMatchCounts(config: ExtractionConfig): MatchResult {
  checkConfig(config)
  const samples = loadFrames(config.input, config.fps)
  if (samples.length === 0) {
    throw new Error(`${config.input}: no frames sampled`)
  }
  const { width, height } = samples[0].image
  for (const sample of samples) {
    if (sample.image.width !== width || sample.image.height !== height) {
      throw new Error(
        `frame ${sample.index} is ${sample.image.width}x` +
          `${sample.image.height}, expected ${width}x${height}`,
      )
    }
  }
  const mask: Mask = resolveMask(config.mask ?? 'auto', width, height)
  const entries: MatchEntry[] = framePairs(config, samples).map(([a, b]) => ({
    frameA: a,
    frameB: b,
    count: matchCount(
      samples[a].image,
      samples[b].image,
      mask,
      config.confidence,
    ),
  }))
  writeMatchCacheFile(config.out, entries)
  return { pairs: entries.length }
}
