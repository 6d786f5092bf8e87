import {
  mkdtempSync,
  readdirSync,
  readFileSync,
  rmSync,
  writeFileSync,
} from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'

import { afterEach, beforeEach, describe, expect, it } from 'vitest'

import {
  DESCRIPTOR_DIM,
  encodeDescriptorFile,
  encodeMatchCacheFile,
  parsePairsFile,
  readDescriptorFile,
  writeDescriptorFile,
  writeMatchCacheFile,
} from '../src/formats.js'

let dir: string
beforeEach(() => {
  dir = mkdtempSync(join(tmpdir(), 'fmt-'))
})
afterEach(() => {
  rmSync(dir, { recursive: true, force: true })
})

function unitDescriptor(axis: number): Float32Array {
  const descriptor = new Float32Array(DESCRIPTOR_DIM)
  descriptor[axis] = 1
  return descriptor
}

describe('descriptor file', () => {
  it('lays out header and records little-endian', () => {
    const data = encodeDescriptorFile([
      { frameId: 0, descriptor: unitDescriptor(0) },
      { frameId: 7, descriptor: unitDescriptor(3) },
    ])
    expect(data.length).toBe(16 + 2 * (4 + 512 * 4))
    expect(data.toString('ascii', 0, 4)).toBe('CMD1')
    expect(data.readUInt32LE(4)).toBe(2)
    expect(data.readUInt32LE(8)).toBe(512)
    expect(data.readUInt32LE(12)).toBe(0)
    expect(data.readUInt32LE(16)).toBe(0)
    expect(data.readFloatLE(20)).toBe(1)
    const second = 16 + 4 + 512 * 4
    expect(data.readUInt32LE(second)).toBe(7)
    expect(data.readFloatLE(second + 4 + 3 * 4)).toBe(1)
  })

  it('round trips bit-exactly through write and read', () => {
    const descriptor = new Float32Array(DESCRIPTOR_DIM)
    let normSq = 0
    for (let i = 0; i < DESCRIPTOR_DIM; i++) {
      descriptor[i] = Math.abs(Math.sin(i + 1))
      normSq += descriptor[i] * descriptor[i]
    }
    for (let i = 0; i < DESCRIPTOR_DIM; i++) {
      descriptor[i] = Math.fround(descriptor[i] / Math.sqrt(normSq))
    }
    const path = join(dir, 'out.cmd1')
    writeDescriptorFile(path, [{ frameId: 3, descriptor }])
    const loaded = readDescriptorFile(path)
    expect(loaded).toHaveLength(1)
    expect(loaded[0].frameId).toBe(3)
    expect(Buffer.from(loaded[0].descriptor.buffer)).toEqual(
      Buffer.from(descriptor.buffer),
    )
  })

  it('rejects wrong-length descriptors and bad frame ids', () => {
    expect(() =>
      encodeDescriptorFile([{ frameId: 0, descriptor: new Float32Array(2) }]),
    ).toThrow(/512/)
    expect(() =>
      encodeDescriptorFile([{ frameId: -1, descriptor: unitDescriptor(0) }]),
    ).toThrow(/non-negative/)
  })

  it('read rejects truncation and bad magic', () => {
    const path = join(dir, 'good.cmd1')
    writeDescriptorFile(path, [{ frameId: 0, descriptor: unitDescriptor(0) }])
    const good = readFileSync(path)
    const badPath = join(dir, 'bad.cmd1')
    writeFileSync(badPath, good.subarray(0, good.length - 4))
    expect(() => readDescriptorFile(badPath)).toThrow(/does not fit/)
    const wrongMagic = Buffer.from(good)
    wrongMagic.write('NOPE', 0, 'ascii')
    writeFileSync(badPath, wrongMagic)
    expect(() => readDescriptorFile(badPath)).toThrow(/magic/)
    const empty = join(dir, 'empty.cmd1')
    writeDescriptorFile(empty, [])
    expect(readDescriptorFile(empty)).toEqual([])
  })

  it('leaves no temp files behind', () => {
    writeDescriptorFile(join(dir, 'clean.cmd1'), [
      { frameId: 0, descriptor: unitDescriptor(0) },
    ])
    expect(readdirSync(dir)).toEqual(['clean.cmd1'])
  })
})

describe('match cache file', () => {
  it('writes sorted canonical lines with trailing newline', () => {
    const text = encodeMatchCacheFile([
      { frameA: 5, frameB: 1, count: 300 },
      { frameA: 0, frameB: 2, count: 120 },
    ])
    expect(text).toBe('0 2 120\n1 5 300\n')
  })

  it('dedups identical entries and rejects conflicts', () => {
    expect(
      encodeMatchCacheFile([
        { frameA: 0, frameB: 1, count: 5 },
        { frameA: 1, frameB: 0, count: 5 },
      ]),
    ).toBe('0 1 5\n')
    expect(() =>
      encodeMatchCacheFile([
        { frameA: 0, frameB: 1, count: 5 },
        { frameA: 1, frameB: 0, count: 6 },
      ]),
    ).toThrow(/conflicting/)
    expect(() =>
      encodeMatchCacheFile([{ frameA: 2, frameB: 2, count: 5 }]),
    ).toThrow(/self-pair/)
  })

  it('writes through the atomic path', () => {
    const path = join(dir, 'cache.txt')
    writeMatchCacheFile(path, [{ frameA: 0, frameB: 1, count: 9 }])
    expect(readFileSync(path, 'utf8')).toBe('0 1 9\n')
    expect(readdirSync(dir)).toEqual(['cache.txt'])
  })
})

describe('pairs file', () => {
  it('parses lines, comments, and blanks', () => {
    expect(parsePairsFile('# header\n0 1\n\n2 3\n')).toEqual([
      [0, 1],
      [2, 3],
    ])
  })

  it('names the offending line', () => {
    expect(() => parsePairsFile('0 1\n0 1 2\n')).toThrow(/line 2/)
    expect(() => parsePairsFile('0 -1\n')).toThrow(/non-negative/)
    expect(() => parsePairsFile('0 x\n')).toThrow(/line 1/)
  })
})
