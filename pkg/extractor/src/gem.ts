/**
 * Global descriptors: a convolutional backbone (user-supplied weights)
 * followed by generalized-mean pooling and L2 normalization.
 *
 * The model is a standard layers-model bundle on disk: model.json with
 * the topology and a weights manifest, plus the referenced binary shard
 * files.  Loading goes through a small filesystem IO handler so the
 * package works with the pure-JS runtime; no native bindings needed.
 */

import { readFileSync, writeFileSync, mkdirSync } from 'node:fs'
import { join } from 'node:path'

import * as tf from '@tensorflow/tfjs'

import { DESCRIPTOR_DIM } from './formats.js'
import { FrameImage } from './image.js'

/** IO handler reading a model.json + weight shards bundle from a directory. */
function directoryLoadHandler(dir: string): tf.io.IOHandler {
  return {
    load: async () => {
      const manifestPath = join(dir, 'model.json')
      const manifest = JSON.parse(readFileSync(manifestPath, 'utf8'))
      const groups = manifest.weightsManifest ?? []
      const weightSpecs: tf.io.WeightsManifestEntry[] = []
      const buffers: Buffer[] = []
      for (const group of groups) {
        weightSpecs.push(...group.weights)
        for (const path of group.paths) {
          buffers.push(readFileSync(join(dir, path)))
        }
      }
      const weightData = new Uint8Array(Buffer.concat(buffers)).buffer
      return {
        modelTopology: manifest.modelTopology,
        format: manifest.format,
        generatedBy: manifest.generatedBy,
        convertedBy: manifest.convertedBy,
        weightSpecs,
        weightData,
      }
    },
  }
}

/** Counterpart save handler; used to produce compatible weight bundles. */
function directorySaveHandler(dir: string): tf.io.IOHandler {
  return {
    save: async (artifacts: tf.io.ModelArtifacts) => {
      mkdirSync(dir, { recursive: true })
      const weightsName = 'weights.bin'
      const manifest = {
        format: artifacts.format,
        generatedBy: artifacts.generatedBy,
        convertedBy: artifacts.convertedBy,
        modelTopology: artifacts.modelTopology,
        weightsManifest: [
          { paths: [weightsName], weights: artifacts.weightSpecs },
        ],
      }
      writeFileSync(
        join(dir, weightsName),
        Buffer.from(artifacts.weightData as ArrayBuffer),
      )
      writeFileSync(join(dir, 'model.json'), JSON.stringify(manifest))
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON' as const,
        },
      }
    },
  }
}

export async function loadBackbone(weightsDir: string): Promise<tf.LayersModel> {
  return tf.loadLayersModel(directoryLoadHandler(weightsDir))
}

export async function saveBackbone(
  model: tf.LayersModel,
  weightsDir: string,
): Promise<void> {
  await model.save(directorySaveHandler(weightsDir))
}

/**
 * Run the backbone on one frame and pool to a unit descriptor.
 *
 * Activations are clamped at zero (generalized-mean pooling assumes a
 * non-negative feature map), raised to the power p, averaged over the
 * spatial grid, and taken back to the 1/p power; the pooled vector is
 * then L2-normalized.  A backbone whose feature map does not have
 * exactly 512 channels is rejected.
 */
export function gemDescriptor(
  model: tf.LayersModel,
  image: FrameImage,
  p = 3,
): Float32Array {
  if (p <= 0) {
    throw new Error(`pooling power must be positive, got ${p}`)
  }
  const pooled = tf.tidy(() => {
    const input = tf.tensor4d(image.rgb, [1, image.height, image.width, 3])
    const output = model.predict(input) as tf.Tensor
    if (output.rank !== 4) {
      throw new Error(
        `backbone must produce a spatial feature map, got rank ${output.rank}`,
      )
    }
    const channels = output.shape[3] as number
    if (channels !== DESCRIPTOR_DIM) {
      throw new Error(
        `backbone produces ${channels} channels, expected ${DESCRIPTOR_DIM}; ` +
          `wrong architecture or weights`,
      )
    }
    const positive = output.relu()
    const powered = positive.pow(tf.scalar(p))
    const mean = powered.mean([1, 2])
    const descriptor = mean.pow(tf.scalar(1 / p))
    return descriptor.squeeze() as tf.Tensor1D
  })
  const values = pooled.dataSync() as Float32Array
  pooled.dispose()
  let normSq = 0
  for (let i = 0; i < values.length; i++) {
    normSq += values[i] * values[i]
  }
  const norm = Math.sqrt(normSq)
  if (!(norm > 0)) {
    throw new Error('backbone produced an all-zero feature map')
  }
  const unit = new Float32Array(DESCRIPTOR_DIM)
  for (let i = 0; i < values.length; i++) {
    unit[i] = Math.fround(values[i] / norm)
  }
  return unit
}
