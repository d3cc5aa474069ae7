#!/usr/bin/env node
/** featdump --images list.txt --labels labels.txt --patch 128 --stride 32
 *           --layer fc-first --out feats.bin [--net toy-fc] [--dim 64]
 *           [--resize 256] [--scales 1]
 *
 * Exit codes: 0 success (warnings allowed), 1 usage error, 2 data error.
 */

import { readFileSync } from 'fs'
import { dump } from './dump'

const USAGE =
  'usage: featdump --images list.txt --labels labels.txt --out feats.bin\n' +
  '                [--patch 128] [--stride 32] [--layer fc-first]\n' +
  '                [--net toy-fc] [--dim 64] [--resize 256] [--scales 1]'

function parseArgs(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>()
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i]
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`bad argument ${key}`)
    }
    flags.set(key.slice(2), argv[i + 1])
  }
  return flags
}

function intFlag(flags: Map<string, string>, name: string, fallback: number): number {
  const raw = flags.get(name)
  if (raw === undefined) return fallback
  const value = parseInt(raw, 10)
  if (!Number.isFinite(value) || value < 1) throw new Error(`--${name} must be a positive integer`)
  return value
}

function readLines(path: string): string[] {
  return readFileSync(path, 'utf8')
    .split('\n')
    .map(s => s.trim())
    .filter(s => s.length > 0)
}

export function main(argv: string[]): number {
  let flags: Map<string, string>
  try {
    flags = parseArgs(argv)
    for (const required of ['images', 'labels', 'out']) {
      if (!flags.has(required)) throw new Error(`--${required} is required`)
    }
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`)
    return 1
  }
  try {
    const images = readLines(flags.get('images')!)
    const labels = readLines(flags.get('labels')!).map(s => {
      const v = parseInt(s, 10)
      if (!Number.isFinite(v)) throw new Error(`bad label ${JSON.stringify(s)}`)
      return v
    })
    const scales = intFlag(flags, 'scales', 1)
    const result = dump({
      images,
      labels,
      patch: intFlag(flags, 'patch', 128),
      stride: intFlag(flags, 'stride', 32),
      resize: intFlag(flags, 'resize', 256),
      net: flags.get('net') ?? 'toy-fc',
      layer: flags.get('layer') ?? 'fc-first',
      dim: intFlag(flags, 'dim', 64),
      out: flags.get('out')!,
      scaleFactors: Array.from({ length: scales }, (_, i) => 2 ** (-i / 2)),
      log: msg => process.stderr.write(msg + '\n'),
    })
    process.stderr.write(
      `featdump: ${result.records} records, ${result.warnings} warnings, ` +
      `${result.files.length} file(s)\n`,
    )
    return 0
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`)
    return 2
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)))
}
