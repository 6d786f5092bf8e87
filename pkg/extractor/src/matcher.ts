/**
 * Deterministic patch correspondence counting.
 *
 * Keypoints sit on a regular grid sized to at most ~400 points per
 * frame.  Each keypoint carries a mean-subtracted, L2-normalized 8x8
 * luma patch; two frames are matched by mutual nearest neighbor over
 * those patches, and a correspondence counts when its normalized
 * cross-correlation clears the confidence cutoff and both endpoints lie
 * in the usable mask region.  Pure arithmetic, so identical inputs give
 * identical counts on every run.
 */

import { FrameImage } from './image.js'
import { Mask } from './mask.js'

export const PATCH_SIZE = 8
export const MAX_KEYPOINTS = 400
export const DEFAULT_CONFIDENCE = 0.5
const MIN_STRIDE = 4
const TEXTURE_FLOOR = 1e-6

export interface Keypoint {
  x: number
  y: number
  /** flattened normalized patch, length PATCH_SIZE * PATCH_SIZE */
  descriptor: Float32Array
}

function gridStride(width: number, height: number): number {
  const usable = Math.max(1, (width - PATCH_SIZE) * (height - PATCH_SIZE))
  return Math.max(MIN_STRIDE, Math.ceil(Math.sqrt(usable / MAX_KEYPOINTS)))
}

function patchDescriptor(
  image: FrameImage,
  left: number,
  top: number,
): Float32Array | null {
  const values = new Float32Array(PATCH_SIZE * PATCH_SIZE)
  let sum = 0
  for (let row = 0; row < PATCH_SIZE; row++) {
    for (let col = 0; col < PATCH_SIZE; col++) {
      const value = image.gray[(top + row) * image.width + left + col]
      values[row * PATCH_SIZE + col] = value
      sum += value
    }
  }
  const mean = sum / values.length
  let normSq = 0
  for (let i = 0; i < values.length; i++) {
    values[i] -= mean
    normSq += values[i] * values[i]
  }
  if (normSq < TEXTURE_FLOOR) {
    return null // flat patch; correlation would be meaningless
  }
  const norm = Math.sqrt(normSq)
  for (let i = 0; i < values.length; i++) {
    values[i] /= norm
  }
  return values
}

/** Grid keypoints with usable, textured patches; deterministic order. */
export function extractKeypoints(image: FrameImage, mask: Mask): Keypoint[] {
  if (mask.width !== image.width || mask.height !== image.height) {
    throw new Error(
      `mask is ${mask.width}x${mask.height}, frame is ` +
        `${image.width}x${image.height}`,
    )
  }
  const stride = gridStride(image.width, image.height)
  const keypoints: Keypoint[] = []
  for (let top = 0; top + PATCH_SIZE <= image.height; top += stride) {
    for (let left = 0; left + PATCH_SIZE <= image.width; left += stride) {
      const x = left + PATCH_SIZE / 2
      const y = top + PATCH_SIZE / 2
      if (!mask.valid[y * mask.width + x]) {
        continue
      }
      const descriptor = patchDescriptor(image, left, top)
      if (descriptor) {
        keypoints.push({ x, y, descriptor })
      }
    }
  }
  return keypoints
}

function bestMatches(from: Keypoint[], to: Keypoint[]): Int32Array {
  const best = new Int32Array(from.length).fill(-1)
  for (let i = 0; i < from.length; i++) {
    let bestScore = -Infinity
    for (let j = 0; j < to.length; j++) {
      const a = from[i].descriptor
      const b = to[j].descriptor
      let score = 0
      for (let k = 0; k < a.length; k++) {
        score += a[k] * b[k]
      }
      if (score > bestScore) {
        bestScore = score
        best[i] = j
      }
    }
  }
  return best
}

/**
 * Count mutual-nearest-neighbor correspondences between two frames with
 * correlation at or above the confidence cutoff.  Symmetric in its frame
 * arguments by construction.
 */
export function matchCount(
  imageA: FrameImage,
  imageB: FrameImage,
  mask: Mask,
  confidence = DEFAULT_CONFIDENCE,
): number {
  const keypointsA = extractKeypoints(imageA, mask)
  const keypointsB = extractKeypoints(imageB, mask)
  if (keypointsA.length === 0 || keypointsB.length === 0) {
    return 0
  }
  const forward = bestMatches(keypointsA, keypointsB)
  const backward = bestMatches(keypointsB, keypointsA)
  let count = 0
  for (let i = 0; i < keypointsA.length; i++) {
    const j = forward[i]
    if (j < 0 || backward[j] !== i) {
      continue
    }
    const a = keypointsA[i].descriptor
    const b = keypointsB[j].descriptor
    let score = 0
    for (let k = 0; k < a.length; k++) {
      score += a[k] * b[k]
    }
    if (score >= confidence) {
      count += 1
    }
  }
  return count
}
