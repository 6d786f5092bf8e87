import { mkdirSync, mkdtempSync, rmSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import { join } from 'node:path'

import { afterEach, beforeEach, describe, expect, it } from 'vitest'

import { loadFrames, parseY4m, sampleIndices } from '../src/frames.js'
import { decodeImageFile } from '../src/image.js'
import { encodePng, encodeY4m, noiseRgba, seededRng } from './helpers.js'

let dir: string
beforeEach(() => {
  dir = mkdtempSync(join(tmpdir(), 'frames-'))
})
afterEach(() => {
  rmSync(dir, { recursive: true, force: true })
})

describe('png decode', () => {
  it('round trips pixel data', () => {
    const rgba = noiseRgba(16, 12, 3)
    const path = join(dir, 'frame.png')
    writeFileSync(path, encodePng(16, 12, rgba))
    const image = decodeImageFile(path)
    expect(image.width).toBe(16)
    expect(image.height).toBe(12)
    expect(image.rgb[0]).toBeCloseTo(rgba[0] / 255, 6)
    const luma =
      (0.299 * rgba[0] + 0.587 * rgba[1] + 0.114 * rgba[2]) / 255
    expect(image.gray[0]).toBeCloseTo(luma, 6)
  })

  it('rejects unknown extensions', () => {
    const path = join(dir, 'frame.gif')
    writeFileSync(path, Buffer.from('GIF89a'))
    expect(() => decodeImageFile(path)).toThrow(/extension/)
  })
})

describe('image directory input', () => {
  it('orders frames by filename and ids by index', () => {
    for (const name of ['c.png', 'a.png', 'b.png']) {
      const seed = name.charCodeAt(0)
      writeFileSync(join(dir, name), encodePng(8, 8, noiseRgba(8, 8, seed)))
    }
    writeFileSync(join(dir, 'notes.txt'), 'ignored')
    const samples = loadFrames(dir, 10)
    expect(samples.map((s) => s.index)).toEqual([0, 1, 2])
    // frame 0 must be a.png: compare one decoded pixel
    const expected = decodeImageFile(join(dir, 'a.png'))
    expect(samples[0].image.gray[0]).toBe(expected.gray[0])
  })

  it('rejects an empty directory', () => {
    const empty = join(dir, 'empty')
    mkdirSync(empty)
    expect(() => loadFrames(empty, 10)).toThrow(/no PNG or JPEG/)
  })
})

describe('y4m input', () => {
  function lumaFrames(count: number, width: number, height: number) {
    const rng = seededRng(17)
    const frames: Uint8Array[] = []
    for (let k = 0; k < count; k++) {
      const luma = new Uint8Array(width * height)
      for (let i = 0; i < luma.length; i++) {
        luma[i] = Math.floor(rng() * 256)
      }
      frames.push(luma)
    }
    return frames
  }

  it('parses header, dimensions, and frame count', () => {
    const video = parseY4m(encodeY4m(32, 24, 20, lumaFrames(6, 32, 24)))
    expect(video.width).toBe(32)
    expect(video.height).toBe(24)
    expect(video.fpsNumerator).toBe(20)
    expect(video.frames).toHaveLength(6)
    // flat chroma means the BT.601 transform reduces to scaled luma
    const first = video.frames[0]
    expect(first.gray[0]).toBeCloseTo(
      Math.min(1, Math.max(0, (1.164 * (lumaFrames(6, 32, 24)[0][0] - 16)) / 255)),
      5,
    )
  })

  it('downsamples by the fps ratio', () => {
    const path = join(dir, 'clip.y4m')
    writeFileSync(path, encodeY4m(16, 16, 20, lumaFrames(10, 16, 16)))
    const samples = loadFrames(path, 10)
    expect(samples).toHaveLength(5)
    expect(samples.map((s) => s.index)).toEqual([0, 1, 2, 3, 4])
    const native = parseY4m(encodeY4m(16, 16, 20, lumaFrames(10, 16, 16)))
    expect(samples[1].image.gray[0]).toBe(native.frames[2].gray[0])
  })

  it('rejects truncated and non-y4m payloads', () => {
    const data = encodeY4m(16, 16, 10, lumaFrames(2, 16, 16))
    expect(() => parseY4m(data.subarray(0, data.length - 10))).toThrow(
      /truncated/,
    )
    expect(() => parseY4m(Buffer.from('RIFF....'))).toThrow(/magic|header/)
  })

  it('points compressed video at frame pre-extraction', () => {
    const path = join(dir, 'clip.mp4')
    writeFileSync(path, Buffer.alloc(64))
    expect(() => loadFrames(path, 10)).toThrow(/pre-extract/)
  })
})

describe('sampling arithmetic', () => {
  it('matches floor(k * native / target)', () => {
    expect(sampleIndices(30, 10, 9)).toEqual([0, 3, 6])
    expect(sampleIndices(10, 10, 4)).toEqual([0, 1, 2, 3])
    expect(sampleIndices(5, 10, 3)).toEqual([0, 0, 1, 1, 2, 2])
  })

  it('rejects non-positive rates', () => {
    expect(() => sampleIndices(0, 10, 5)).toThrow(/positive/)
    expect(() => sampleIndices(10, 0, 5)).toThrow(/positive/)
  })
})
