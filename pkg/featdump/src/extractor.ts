/** Patch feature extractors keyed by network id and layer name.
 *
 * The exporter never post-processes activations; extractors must emit the
 * raw non-negative layer output. `toy-fc` is a deterministic stand-in for a
 * real backbone: a fixed random projection of 8x8 block-averaged pixels
 * through a rectifier, so dumps are reproducible anywhere with no model
 * downloads. Real backends register the same interface.
 */

import { GrayImage, patchBlockFeatures } from './image'

export interface Extractor {
  dim: number
  layer: string
  extract(img: GrayImage, x: number, y: number, patch: number): Float32Array
}

const BLOCKS = 8 // 8x8 pooled input features

/** xorshift32 with fixed seed constants; portable and documented. */
function weightStream(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state ^= state << 13
    state >>>= 0
    state ^= state >>> 17
    state ^= state << 5
    state >>>= 0
    return state / 0xffffffff - 0.5
  }
}

class ToyFullyConnected implements Extractor {
  readonly layer = 'fc-first'
  private readonly weights: Float64Array
  private readonly bias: Float64Array

  constructor(readonly dim: number) {
    const next = weightStream(0x9e3779b9)
    const inputs = BLOCKS * BLOCKS
    this.weights = new Float64Array(dim * inputs)
    for (let i = 0; i < this.weights.length; i++) this.weights[i] = next()
    this.bias = new Float64Array(dim)
    for (let j = 0; j < dim; j++) this.bias[j] = next() * 0.1
  }

  extract(img: GrayImage, x: number, y: number, patch: number): Float32Array {
    const f = patchBlockFeatures(img, x, y, patch, BLOCKS)
    const inputs = f.length
    const out = new Float32Array(this.dim)
    for (let j = 0; j < this.dim; j++) {
      let acc = this.bias[j]
      const row = j * inputs
      for (let i = 0; i < inputs; i++) acc += this.weights[row + i] * f[i]
      out[j] = acc > 0 ? acc : 0 // rectified, hence non-negative
    }
    return out
  }
}

export function makeExtractor(net: string, layer: string, dim: number): Extractor {
  if (net !== 'toy-fc') {
    throw new Error(`unknown network id ${JSON.stringify(net)}`)
  }
  const extractor = new ToyFullyConnected(dim)
  if (layer !== extractor.layer) {
    throw new Error(
      `network ${net} has no layer ${JSON.stringify(layer)} (expected "${extractor.layer}")`,
    )
  }
  return extractor
}
