/**
 * Still-image decoding.  PNG and JPEG files become a uniform FrameImage
 * with float pixel data in [0, 1]: an interleaved RGB plane for the
 * descriptor network and a luma plane for the patch matcher.
 */

import { readFileSync } from 'node:fs'
import { extname } from 'node:path'

import jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

export interface FrameImage {
  width: number
  height: number
  /** interleaved RGB, length width * height * 3, values in [0, 1] */
  rgb: Float32Array
  /** BT.601 luma, length width * height, values in [0, 1] */
  gray: Float32Array
}

export function fromRgba(
  width: number,
  height: number,
  rgba: Uint8Array,
): FrameImage {
  const pixels = width * height
  if (rgba.length !== pixels * 4) {
    throw new Error(
      `rgba buffer has ${rgba.length} bytes for ${width}x${height}`,
    )
  }
  const rgb = new Float32Array(pixels * 3)
  const gray = new Float32Array(pixels)
  for (let i = 0; i < pixels; i++) {
    const r = rgba[i * 4] / 255
    const g = rgba[i * 4 + 1] / 255
    const b = rgba[i * 4 + 2] / 255
    rgb[i * 3] = r
    rgb[i * 3 + 1] = g
    rgb[i * 3 + 2] = b
    gray[i] = 0.299 * r + 0.587 * g + 0.114 * b
  }
  return { width, height, rgb, gray }
}

export const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg'])

export function decodeImageFile(path: string): FrameImage {
  const extension = extname(path).toLowerCase()
  const data = readFileSync(path)
  if (extension === '.png') {
    const decoded = PNG.sync.read(data)
    return fromRgba(decoded.width, decoded.height, decoded.data)
  }
  if (extension === '.jpg' || extension === '.jpeg') {
    const decoded = jpeg.decode(data, { useTArray: true, maxMemoryUsageInMB: 512 })
    return fromRgba(decoded.width, decoded.height, decoded.data)
  }
  throw new Error(`${path}: unsupported image extension ${extension}`)
}
