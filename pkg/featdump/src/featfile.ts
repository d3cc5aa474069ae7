/** MDPM-FEAT v1 writer (little-endian).
 *
 * header  20 bytes   "MDPM" | u32 version=1 | u32 dim | u64 count
 * record  20+4*dim   u32 image_id | i32 class_label |
 *                    u16 x | u16 y | u16 w | u16 h | f32 scale |
 *                    dim * f32 activations
 */

import { closeSync, openSync, writeSync } from 'fs'

export interface FeatRecord {
  imageId: number
  classLabel: number
  x: number
  y: number
  w: number
  h: number
  scale: number
  activation: Float32Array
}

export class FeatFileWriter {
  private readonly fd: number
  private readonly dim: number
  private count = 0

  constructor(path: string, dim: number) {
    if (dim < 1) throw new Error('dim must be >= 1')
    this.dim = dim
    this.fd = openSync(path, 'w')
    writeSync(this.fd, this.header()) // placeholder count, rewritten on close
  }

  private header(): Buffer {
    const header = Buffer.alloc(20)
    header.write('MDPM', 0, 'ascii')
    header.writeUInt32LE(1, 4)
    header.writeUInt32LE(this.dim, 8)
    header.writeBigUInt64LE(BigInt(this.count), 12)
    return header
  }

  append(record: FeatRecord): void {
    if (record.activation.length !== this.dim) {
      throw new Error(`activation length ${record.activation.length} != dim ${this.dim}`)
    }
    const buf = Buffer.alloc(20 + 4 * this.dim)
    buf.writeUInt32LE(record.imageId >>> 0, 0)
    buf.writeInt32LE(record.classLabel, 4)
    buf.writeUInt16LE(record.x, 8)
    buf.writeUInt16LE(record.y, 10)
    buf.writeUInt16LE(record.w, 12)
    buf.writeUInt16LE(record.h, 14)
    buf.writeFloatLE(record.scale, 16)
    for (let i = 0; i < this.dim; i++) {
      buf.writeFloatLE(record.activation[i], 20 + 4 * i)
    }
    writeSync(this.fd, buf)
    this.count += 1
  }

  /** Rewrites the header with the final count and closes the file. */
  close(): number {
    const header = this.header()
    writeSync(this.fd, header, 0, header.length, 0) // pwrite; offset unmoved
    closeSync(this.fd)
    return this.count
  }
}
