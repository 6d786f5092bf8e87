/**
 * Frame enumeration for the two supported inputs.
 *
 * An image directory is treated as an already-sampled sequence: every
 * PNG/JPEG in sorted filename order is one frame and the sampling rate
 * is ignored.  A .y4m video (uncompressed YUV4MPEG2) carries its own
 * frame rate and is resampled to the requested rate.  Compressed video
 * is rejected with a pointer to pre-extracting frames, so the package
 * stays free of native decoders.
 */

import { readdirSync, readFileSync, statSync } from 'node:fs'
import { extname, join } from 'node:path'

import { FrameImage, IMAGE_EXTENSIONS, decodeImageFile } from './image.js'

export interface FrameSample {
  /** sample index; becomes the frame id in every output file */
  index: number
  image: FrameImage
}

export function listFrameFiles(dir: string): string[] {
  const names = readdirSync(dir)
    .filter((name) => IMAGE_EXTENSIONS.has(extname(name).toLowerCase()))
    .sort()
  if (names.length === 0) {
    throw new Error(`${dir}: no PNG or JPEG frames found`)
  }
  return names.map((name) => join(dir, name))
}

/** Source indices for resampling frames at nativeFps down to targetFps. */
export function sampleIndices(
  nativeFps: number,
  targetFps: number,
  frameCount: number,
): number[] {
  if (nativeFps <= 0 || targetFps <= 0) {
    throw new Error('frame rates must be positive')
  }
  const step = nativeFps / targetFps
  const indices: number[] = []
  for (let k = 0; ; k++) {
    const source = Math.floor(k * step)
    if (source >= frameCount) {
      break
    }
    indices.push(source)
    if (step <= 0) {
      break
    }
  }
  return indices
}

interface Y4mVideo {
  width: number
  height: number
  fpsNumerator: number
  fpsDenominator: number
  frames: FrameImage[]
}

function lumaToImage(
  width: number,
  height: number,
  yPlane: Uint8Array,
  uPlane: Uint8Array | null,
  vPlane: Uint8Array | null,
): FrameImage {
  const pixels = width * height
  const rgb = new Float32Array(pixels * 3)
  const gray = new Float32Array(pixels)
  const chromaWidth = width >> 1
  for (let row = 0; row < height; row++) {
    for (let col = 0; col < width; col++) {
      const i = row * width + col
      const y = yPlane[i]
      // limited-range BT.601; mono input keeps the chroma terms at zero
      let cb = 128
      let cr = 128
      if (uPlane && vPlane) {
        const ci = (row >> 1) * chromaWidth + (col >> 1)
        cb = uPlane[ci]
        cr = vPlane[ci]
      }
      const yScaled = 1.164 * (y - 16)
      const r = (yScaled + 1.596 * (cr - 128)) / 255
      const g = (yScaled - 0.392 * (cb - 128) - 0.813 * (cr - 128)) / 255
      const b = (yScaled + 2.017 * (cb - 128)) / 255
      rgb[i * 3] = Math.min(1, Math.max(0, r))
      rgb[i * 3 + 1] = Math.min(1, Math.max(0, g))
      rgb[i * 3 + 2] = Math.min(1, Math.max(0, b))
      gray[i] = Math.min(1, Math.max(0, yScaled / 255))
    }
  }
  return { width, height, rgb, gray }
}

export function parseY4m(data: Buffer): Y4mVideo {
  const headerEnd = data.indexOf(0x0a)
  if (headerEnd < 0) {
    throw new Error('y4m: missing stream header')
  }
  const header = data.toString('ascii', 0, headerEnd)
  const tokens = header.split(' ')
  if (tokens[0] !== 'YUV4MPEG2') {
    throw new Error(`y4m: bad magic ${JSON.stringify(tokens[0])}`)
  }
  let width = 0
  let height = 0
  let fpsNumerator = 0
  let fpsDenominator = 1
  let colorspace = 'C420'
  for (const token of tokens.slice(1)) {
    if (token.startsWith('W')) {
      width = Number(token.slice(1))
    } else if (token.startsWith('H')) {
      height = Number(token.slice(1))
    } else if (token.startsWith('F')) {
      const [num, den] = token.slice(1).split(':').map(Number)
      fpsNumerator = num
      fpsDenominator = den
    } else if (token.startsWith('C')) {
      colorspace = token
    }
  }
  if (!width || !height || !fpsNumerator || !fpsDenominator) {
    throw new Error(`y4m: header lacks W/H/F fields: ${JSON.stringify(header)}`)
  }
  const mono = colorspace.startsWith('Cmono')
  if (!mono && !colorspace.startsWith('C420')) {
    throw new Error(`y4m: unsupported colorspace ${colorspace}`)
  }
  const lumaBytes = width * height
  const chromaBytes = mono ? 0 : (width >> 1) * (height >> 1)
  const frames: FrameImage[] = []
  let offset = headerEnd + 1
  while (offset < data.length) {
    const frameEnd = data.indexOf(0x0a, offset)
    if (frameEnd < 0 || data.toString('ascii', offset, offset + 5) !== 'FRAME') {
      throw new Error(`y4m: bad frame header at byte ${offset}`)
    }
    offset = frameEnd + 1
    if (offset + lumaBytes + 2 * chromaBytes > data.length) {
      throw new Error(`y4m: truncated frame ${frames.length}`)
    }
    const yPlane = data.subarray(offset, offset + lumaBytes)
    offset += lumaBytes
    let uPlane: Uint8Array | null = null
    let vPlane: Uint8Array | null = null
    if (!mono) {
      uPlane = data.subarray(offset, offset + chromaBytes)
      offset += chromaBytes
      vPlane = data.subarray(offset, offset + chromaBytes)
      offset += chromaBytes
    }
    frames.push(lumaToImage(width, height, yPlane, uPlane, vPlane))
  }
  return { width, height, fpsNumerator, fpsDenominator, frames }
}

const COMPRESSED_VIDEO = new Set(['.mp4', '.avi', '.mov', '.mkv', '.webm'])

/**
 * Load the sampled frame sequence for an input path.  Directories yield
 * one frame per image file; .y4m videos are resampled to fps.
 */
export function loadFrames(input: string, fps: number): FrameSample[] {
  const stats = statSync(input)
  if (stats.isDirectory()) {
    return listFrameFiles(input).map((path, index) => ({
      index,
      image: decodeImageFile(path),
    }))
  }
  const extension = extname(input).toLowerCase()
  if (extension === '.y4m') {
    const video = parseY4m(readFileSync(input))
    const nativeFps = video.fpsNumerator / video.fpsDenominator
    const indices = sampleIndices(nativeFps, fps, video.frames.length)
    return indices.map((source, index) => ({
      index,
      image: video.frames[source],
    }))
  }
  if (COMPRESSED_VIDEO.has(extension)) {
    throw new Error(
      `${input}: compressed video is not supported; pre-extract frames ` +
        `to an image directory or provide uncompressed .y4m`,
    )
  }
  throw new Error(`${input}: expected an image directory or a .y4m video`)
}
