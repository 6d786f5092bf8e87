export {
  DESCRIPTOR_DIM,
  type DescriptorFrame,
  type MatchEntry,
  atomicWriteFile,
  encodeDescriptorFile,
  encodeMatchCacheFile,
  parsePairsFile,
  readDescriptorFile,
  writeDescriptorFile,
  writeMatchCacheFile,
} from './formats.js'
export { type FrameImage, decodeImageFile, fromRgba } from './image.js'
export {
  type FrameSample,
  listFrameFiles,
  loadFrames,
  parseY4m,
  sampleIndices,
} from './frames.js'
export {
  type Mask,
  circularMask,
  fullMask,
  maskFromImage,
  resolveMask,
} from './mask.js'
export { gemDescriptor, loadBackbone, saveBackbone } from './gem.js'
export {
  DEFAULT_CONFIDENCE,
  MAX_KEYPOINTS,
  PATCH_SIZE,
  extractKeypoints,
  matchCount,
} from './matcher.js'
export {
  type ExtractionConfig,
  DEFAULT_FPS,
  defaultConfig,
  extractDescriptors,
  extractMatchCounts,
} from './extract.js'
export { runCli } from './cli.js'
