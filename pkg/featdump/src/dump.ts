/** The export job: resize, grid-sample, extract, and write feature records. */

import { makeExtractor } from './extractor'
import { FeatFileWriter } from './featfile'
import { samplePatchGrid } from './geometry'
import { loadImage, resizeSmallerSide } from './image'

export interface DumpJob {
  images: string[]
  labels: number[]
  patch: number
  stride: number
  resize: number
  net: string
  layer: string
  dim: number
  out: string
  /** smaller-side resize factors; one output file per entry */
  scaleFactors: number[]
  log?: (msg: string) => void
}

export interface DumpResult {
  records: number
  warnings: number
  files: string[]
}

export function scaleOutputPath(out: string, scaleIndex: number): string {
  return scaleIndex === 0 ? out : `${out}.scale${scaleIndex}`
}

export function dump(job: DumpJob): DumpResult {
  if (job.images.length !== job.labels.length) {
    throw new Error(`${job.images.length} images but ${job.labels.length} labels`)
  }
  const log = job.log ?? (() => undefined)
  const extractor = makeExtractor(job.net, job.layer, job.dim) // aborts on layer mismatch
  let total = 0
  let warnings = 0
  const files: string[] = []
  for (let s = 0; s < job.scaleFactors.length; s++) {
    const target = Math.round(job.resize * job.scaleFactors[s])
    const path = scaleOutputPath(job.out, s)
    const writer = new FeatFileWriter(path, extractor.dim)
    for (let imageId = 0; imageId < job.images.length; imageId++) {
      let resized
      try {
        resized = resizeSmallerSide(loadImage(job.images[imageId]), target)
      } catch (err) {
        warnings += 1
        log(`warning: skipping ${job.images[imageId]}: ${(err as Error).message}`)
        continue
      }
      const grid = samplePatchGrid(resized.image.width, resized.image.height,
                                   job.patch, job.stride)
      if (grid.length === 0) {
        warnings += 1
        log(`warning: ${job.images[imageId]} smaller than the patch after resize`)
        continue
      }
      for (const g of grid) {
        writer.append({
          imageId,
          classLabel: job.labels[imageId],
          x: g.x,
          y: g.y,
          w: g.w,
          h: g.h,
          scale: resized.factor,
          activation: extractor.extract(resized.image, g.x, g.y, job.patch),
        })
      }
    }
    total += writer.close()
    files.push(path)
  }
  return { records: total, warnings, files }
}
