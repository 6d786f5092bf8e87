/** Shared fixtures: seeded images, PNG/Y4M encoders, a tiny backbone. */

import { writeFileSync } from 'node:fs'
import { join } from 'node:path'

import * as tf from '@tensorflow/tfjs'
import { PNG } from 'pngjs'

import { FrameImage, fromRgba } from '../src/image.js'
import { saveBackbone } from '../src/gem.js'

/** mulberry32: tiny deterministic PRNG for fixture data */
export function seededRng(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

export function noiseRgba(
  width: number,
  height: number,
  seed: number,
): Uint8Array {
  const rng = seededRng(seed)
  const rgba = new Uint8Array(width * height * 4)
  for (let i = 0; i < width * height; i++) {
    rgba[i * 4] = Math.floor(rng() * 256)
    rgba[i * 4 + 1] = Math.floor(rng() * 256)
    rgba[i * 4 + 2] = Math.floor(rng() * 256)
    rgba[i * 4 + 3] = 255
  }
  return rgba
}

export function noiseImage(
  width: number,
  height: number,
  seed: number,
): FrameImage {
  return fromRgba(width, height, noiseRgba(width, height, seed))
}

export function flatImage(
  width: number,
  height: number,
  value = 0.5,
): FrameImage {
  return {
    width,
    height,
    rgb: new Float32Array(width * height * 3).fill(value),
    gray: new Float32Array(width * height).fill(value),
  }
}

export function encodePng(
  width: number,
  height: number,
  rgba: Uint8Array,
): Buffer {
  const png = new PNG({ width, height })
  Buffer.from(rgba).copy(png.data)
  return PNG.sync.write(png)
}

export function writeNoisePng(
  dir: string,
  name: string,
  width: number,
  height: number,
  seed: number,
): string {
  const path = join(dir, name)
  writeFileSync(path, encodePng(width, height, noiseRgba(width, height, seed)))
  return path
}

/** Encode grayscale frames as a C420 YUV4MPEG2 stream with flat chroma. */
export function encodeY4m(
  width: number,
  height: number,
  fps: number,
  frames: Uint8Array[],
): Buffer {
  const header = Buffer.from(
    `YUV4MPEG2 W${width} H${height} F${fps}:1 Ip A1:1 C420\n`,
    'ascii',
  )
  const chromaBytes = (width >> 1) * (height >> 1)
  const chunks: Buffer[] = [header]
  for (const luma of frames) {
    if (luma.length !== width * height) {
      throw new Error('luma plane size mismatch')
    }
    chunks.push(Buffer.from('FRAME\n', 'ascii'))
    chunks.push(Buffer.from(luma))
    chunks.push(Buffer.alloc(chromaBytes, 128))
    chunks.push(Buffer.alloc(chromaBytes, 128))
  }
  return Buffer.concat(chunks)
}

/**
 * Build a small fully-convolutional backbone with seeded weights.  Two
 * 3x3 conv layers then a 1x1 projection to the requested channel count;
 * works on any input size, which is all the descriptor path needs.
 */
export async function makeBackboneDir(
  dir: string,
  channels = 512,
  seed = 11,
): Promise<void> {
  const model = tf.sequential()
  model.add(
    tf.layers.conv2d({
      inputShape: [null as unknown as number, null as unknown as number, 3],
      filters: 8,
      kernelSize: 3,
      strides: 2,
      activation: 'relu',
      padding: 'same',
    }),
  )
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      strides: 2,
      activation: 'relu',
      padding: 'same',
    }),
  )
  model.add(tf.layers.conv2d({ filters: channels, kernelSize: 1 }))
  const rng = seededRng(seed)
  const replacements = model.getWeights().map((weight) => {
    const values = new Float32Array(weight.size)
    for (let i = 0; i < values.length; i++) {
      values[i] = (rng() - 0.5) * 0.4
    }
    return tf.tensor(values, weight.shape)
  })
  model.setWeights(replacements)
  replacements.forEach((tensor) => tensor.dispose())
  await saveBackbone(model, dir)
  model.dispose()
}
