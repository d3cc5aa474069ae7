/** Binary PGM (P5) / PPM (P6) loading and the smaller-side-to-256 resize. */

import { readFileSync } from 'fs'

export interface GrayImage {
  width: number
  height: number
  /** row-major luminance in [0, 255] */
  pixels: Float64Array
}

function parseHeader(buf: Buffer): { magic: string; fields: number[]; offset: number } {
  // magic, whitespace-separated decimal fields, single whitespace, then raster
  const magic = buf.toString('ascii', 0, 2)
  let i = 2
  const fields: number[] = []
  const wanted = 3 // width, height, maxval
  while (fields.length < wanted) {
    while (i < buf.length && /\s/.test(String.fromCharCode(buf[i]))) i++
    if (i < buf.length && buf[i] === 0x23) {
      // comment line
      while (i < buf.length && buf[i] !== 0x0a) i++
      continue
    }
    let start = i
    while (i < buf.length && !/\s/.test(String.fromCharCode(buf[i]))) i++
    if (start === i) throw new Error('truncated netpbm header')
    fields.push(parseInt(buf.toString('ascii', start, i), 10))
  }
  i++ // the single whitespace byte ending the header
  return { magic, fields, offset: i }
}

export function loadImage(path: string): GrayImage {
  const buf = readFileSync(path)
  const { magic, fields, offset } = parseHeader(buf)
  const [width, height, maxval] = fields
  if (!Number.isFinite(width) || !Number.isFinite(height) || width < 1 || height < 1) {
    throw new Error(`bad dimensions in ${path}`)
  }
  if (maxval !== 255) throw new Error(`only maxval 255 supported, got ${maxval}`)
  const n = width * height
  const pixels = new Float64Array(n)
  if (magic === 'P5') {
    if (buf.length - offset < n) throw new Error(`truncated P5 raster in ${path}`)
    for (let i = 0; i < n; i++) pixels[i] = buf[offset + i]
  } else if (magic === 'P6') {
    if (buf.length - offset < 3 * n) throw new Error(`truncated P6 raster in ${path}`)
    for (let i = 0; i < n; i++) {
      const r = buf[offset + 3 * i]
      const g = buf[offset + 3 * i + 1]
      const b = buf[offset + 3 * i + 2]
      pixels[i] = 0.299 * r + 0.587 * g + 0.114 * b
    }
  } else {
    throw new Error(`unsupported image magic ${JSON.stringify(magic)} in ${path}`)
  }
  return { width, height, pixels }
}

/**
 * Resize so the smaller side is exactly `target`, aspect preserved
 * (nearest-neighbor; deterministic across platforms). Returns the image
 * and the applied factor target/min(w, h).
 */
export function resizeSmallerSide(img: GrayImage, target: number): { image: GrayImage; factor: number } {
  const minSide = Math.min(img.width, img.height)
  const factor = target / minSide
  const outW = img.width <= img.height ? target : Math.round(img.width * factor)
  const outH = img.width <= img.height ? Math.round(img.height * factor) : target
  const pixels = new Float64Array(outW * outH)
  for (let y = 0; y < outH; y++) {
    const sy = Math.min(img.height - 1, Math.floor(y / factor))
    for (let x = 0; x < outW; x++) {
      const sx = Math.min(img.width - 1, Math.floor(x / factor))
      pixels[y * outW + x] = img.pixels[sy * img.width + sx]
    }
  }
  return { image: { width: outW, height: outH, pixels }, factor }
}

/** Average-pool a patch region down to size x size block features in [0, 1]. */
export function patchBlockFeatures(
  img: GrayImage,
  x0: number,
  y0: number,
  patch: number,
  size: number,
): Float64Array {
  const out = new Float64Array(size * size)
  const block = patch / size
  for (let by = 0; by < size; by++) {
    for (let bx = 0; bx < size; bx++) {
      let acc = 0
      let count = 0
      const yStart = y0 + Math.floor(by * block)
      const yEnd = y0 + Math.floor((by + 1) * block)
      const xStart = x0 + Math.floor(bx * block)
      const xEnd = x0 + Math.floor((bx + 1) * block)
      for (let y = yStart; y < yEnd; y++) {
        for (let x = xStart; x < xEnd; x++) {
          acc += img.pixels[y * img.width + x]
          count++
        }
      }
      out[by * size + bx] = count ? acc / (255 * count) : 0
    }
  }
  return out
}
