/** Dense patch-grid enumeration, shared with the consuming library. */

export interface PatchGeometry {
  x: number
  y: number
  w: number
  h: number
  scale: number
}

/**
 * All stride-aligned patch positions fully inside the image, row-major.
 * Returns an empty list when the patch exceeds either image side.
 */
export function samplePatchGrid(
  imageW: number,
  imageH: number,
  patch: number,
  stride: number,
): PatchGeometry[] {
  if (stride < 1) throw new Error('stride must be >= 1')
  if (patch < 1) throw new Error('patch must be >= 1')
  const grid: PatchGeometry[] = []
  if (patch > imageW || patch > imageH) return grid
  for (let y = 0; y + patch <= imageH; y += stride) {
    for (let x = 0; x + patch <= imageW; x += stride) {
      grid.push({ x, y, w: patch, h: patch, scale: 1.0 })
    }
  }
  return grid
}

/** One golden-file line: "W H patch stride : x,y x,y ...". */
export function gridCaseLine(
  imageW: number,
  imageH: number,
  patch: number,
  stride: number,
): string {
  const coords = samplePatchGrid(imageW, imageH, patch, stride)
    .map(g => `${g.x},${g.y}`)
    .join(' ')
  return `${imageW} ${imageH} ${patch} ${stride} : ${coords}`.trimEnd()
}
