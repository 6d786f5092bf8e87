/**
 * Writers and readers for the two interchange formats the mapping and
 * localization pipeline consumes: binary descriptor files and plain-text
 * match-count caches.  Layouts must stay byte-compatible with that
 * pipeline's own serializers; the readers here exist so tests can verify
 * what was written without leaving this package.
 */

import { readFileSync, renameSync, writeFileSync } from 'node:fs'

export const DESCRIPTOR_DIM = 512
const MAGIC = 'CMD1'
const HEADER_BYTES = 16

export interface DescriptorFrame {
  frameId: number
  descriptor: Float32Array
}

/** Write data to a temp file next to the target, then rename over it. */
export function atomicWriteFile(path: string, data: Buffer | string): void {
  const tmp = `${path}.tmp${process.pid}`
  writeFileSync(tmp, data)
  renameSync(tmp, path)
}

function checkFrame(frame: DescriptorFrame, index: number): void {
  if (!Number.isInteger(frame.frameId) || frame.frameId < 0) {
    throw new Error(`frame ${index}: frame id must be a non-negative integer`)
  }
  if (frame.descriptor.length !== DESCRIPTOR_DIM) {
    throw new Error(
      `frame ${index}: descriptor has ${frame.descriptor.length} values, ` +
        `expected ${DESCRIPTOR_DIM}`,
    )
  }
}

/**
 * Serialize frames in the binary descriptor layout, all little-endian:
 * 4-byte magic "CMD1", u32 frame count, u32 dimension, u32 padding zero,
 * then per frame a u32 frame id followed by 512 float32 values.
 */
export function encodeDescriptorFile(frames: DescriptorFrame[]): Buffer {
  const recordBytes = 4 + DESCRIPTOR_DIM * 4
  const out = Buffer.alloc(HEADER_BYTES + frames.length * recordBytes)
  out.write(MAGIC, 0, 'ascii')
  out.writeUInt32LE(frames.length, 4)
  out.writeUInt32LE(DESCRIPTOR_DIM, 8)
  out.writeUInt32LE(0, 12)
  let offset = HEADER_BYTES
  frames.forEach((frame, index) => {
    checkFrame(frame, index)
    out.writeUInt32LE(frame.frameId, offset)
    offset += 4
    for (let i = 0; i < DESCRIPTOR_DIM; i++) {
      out.writeFloatLE(frame.descriptor[i], offset)
      offset += 4
    }
  })
  return out
}

export function writeDescriptorFile(
  path: string,
  frames: DescriptorFrame[],
): void {
  atomicWriteFile(path, encodeDescriptorFile(frames))
}

/** Parse a descriptor file, validating magic, counts, and record sizes. */
export function readDescriptorFile(path: string): DescriptorFrame[] {
  const data = readFileSync(path)
  if (data.length < HEADER_BYTES) {
    throw new Error(`${path}: shorter than the ${HEADER_BYTES} byte header`)
  }
  const magic = data.toString('ascii', 0, 4)
  if (magic !== MAGIC) {
    throw new Error(`${path}: bad magic ${JSON.stringify(magic)}`)
  }
  const count = data.readUInt32LE(4)
  const dim = data.readUInt32LE(8)
  if (dim !== DESCRIPTOR_DIM) {
    throw new Error(`${path}: dimension ${dim}, expected ${DESCRIPTOR_DIM}`)
  }
  const recordBytes = 4 + dim * 4
  if (data.length !== HEADER_BYTES + count * recordBytes) {
    throw new Error(
      `${path}: ${data.length} bytes does not fit ${count} records`,
    )
  }
  const frames: DescriptorFrame[] = []
  let offset = HEADER_BYTES
  for (let k = 0; k < count; k++) {
    const frameId = data.readUInt32LE(offset)
    offset += 4
    const descriptor = new Float32Array(dim)
    for (let i = 0; i < dim; i++) {
      descriptor[i] = data.readFloatLE(offset)
      offset += 4
    }
    frames.push({ frameId, descriptor })
  }
  return frames
}

export interface MatchEntry {
  frameA: number
  frameB: number
  count: number
}

/**
 * Serialize match counts as one "<frame_a> <frame_b> <count>" line per
 * pair with frame_a < frame_b, sorted, trailing newline included.
 */
export function encodeMatchCacheFile(entries: MatchEntry[]): string {
  const seen = new Map<string, number>()
  for (const entry of entries) {
    if (entry.frameA === entry.frameB) {
      throw new Error(`pair (${entry.frameA}, ${entry.frameB}) is a self-pair`)
    }
    const a = Math.min(entry.frameA, entry.frameB)
    const b = Math.max(entry.frameA, entry.frameB)
    const key = `${a} ${b}`
    const existing = seen.get(key)
    if (existing !== undefined && existing !== entry.count) {
      throw new Error(
        `conflicting counts for frame pair (${a}, ${b}): ` +
          `${existing} and ${entry.count}`,
      )
    }
    seen.set(key, entry.count)
  }
  const keys = [...seen.keys()].sort((left, right) => {
    const [la, lb] = left.split(' ').map(Number)
    const [ra, rb] = right.split(' ').map(Number)
    return la - ra || lb - rb
  })
  return keys.map((key) => `${key} ${seen.get(key)}\n`).join('')
}

export function writeMatchCacheFile(path: string, entries: MatchEntry[]): void {
  atomicWriteFile(path, encodeMatchCacheFile(entries))
}

/** Parse a pairs file: one "<frame_a> <frame_b>" line, # comments allowed. */
export function parsePairsFile(text: string): Array<[number, number]> {
  const pairs: Array<[number, number]> = []
  text.split('\n').forEach((raw, lineIndex) => {
    const line = raw.trim()
    if (!line || line.startsWith('#')) {
      return
    }
    const parts = line.split(/\s+/)
    if (parts.length !== 2) {
      throw new Error(
        `pairs file line ${lineIndex + 1}: expected two frame ids, ` +
          `got ${JSON.stringify(raw)}`,
      )
    }
    const [a, b] = parts.map(Number)
    if (!Number.isInteger(a) || !Number.isInteger(b) || a < 0 || b < 0) {
      throw new Error(
        `pairs file line ${lineIndex + 1}: frame ids must be ` +
          `non-negative integers`,
      )
    }
    pairs.push([a, b])
  })
  return pairs
}
