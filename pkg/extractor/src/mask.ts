/**
 * Region-of-interest masks.  A mask marks the usable part of the frame;
 * keypoints in the masked-off remainder (black corners, vignette) never
 * produce correspondences.  Masks come from an image file (luma above
 * half scale = usable) or are auto-generated as the inscribed circle.
 */

import { FrameImage, decodeImageFile } from './image.js'

export interface Mask {
  width: number
  height: number
  /** 1 = usable pixel, 0 = masked off */
  valid: Uint8Array
}

export function fullMask(width: number, height: number): Mask {
  return { width, height, valid: new Uint8Array(width * height).fill(1) }
}

/** Inscribed circle centered in the frame, the usual endoscopy ROI. */
export function circularMask(width: number, height: number): Mask {
  const valid = new Uint8Array(width * height)
  const cx = (width - 1) / 2
  const cy = (height - 1) / 2
  const radius = Math.min(width, height) / 2
  const radiusSq = radius * radius
  for (let row = 0; row < height; row++) {
    for (let col = 0; col < width; col++) {
      const dx = col - cx
      const dy = row - cy
      if (dx * dx + dy * dy <= radiusSq) {
        valid[row * width + col] = 1
      }
    }
  }
  return { width, height, valid }
}

export function maskFromImage(image: FrameImage): Mask {
  const valid = new Uint8Array(image.width * image.height)
  for (let i = 0; i < valid.length; i++) {
    valid[i] = image.gray[i] > 0.5 ? 1 : 0
  }
  return { width: image.width, height: image.height, valid }
}

/**
 * Resolve a mask flag against the frame dimensions: "auto" builds the
 * inscribed circle, "none" disables masking, anything else is an image
 * path whose dimensions must match the frames.
 */
export function resolveMask(
  spec: string | undefined,
  width: number,
  height: number,
): Mask {
  if (spec === undefined || spec === 'none') {
    return fullMask(width, height)
  }
  if (spec === 'auto') {
    return circularMask(width, height)
  }
  const mask = maskFromImage(decodeImageFile(spec))
  if (mask.width !== width || mask.height !== height) {
    throw new Error(
      `mask ${spec} is ${mask.width}x${mask.height}, frames are ` +
        `${width}x${height}`,
    )
  }
  return mask
}
