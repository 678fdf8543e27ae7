/**
 * Cross-check against the CLI on the same database file: the stability and
 * damping curves the UI renders from service responses must agree with the
 * `sweep` CSV exports at the display precision (4 significant digits).
 * Fixtures are produced by scripts/make_ui_fixtures.py.
 */

import { readFileSync } from 'node:fs'
import { dirname, join } from 'node:path'
import { fileURLToPath } from 'node:url'

import { describe, expect, it } from 'vitest'

import type { EigenResult, StabilityPoint } from '../src/api'
import { sig4 } from '../src/format'
import { minDampingCurve } from '../src/views/damping'
import { segmentByMode } from '../src/views/stability'

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), 'fixtures')

function readCsv(name: string): Record<string, string>[] {
  const text = readFileSync(join(FIXTURES, name), 'utf-8').trim()
  const [head, ...lines] = text.split('\n').map((l: string) => l.replace(/\r$/, ''))
  const cols = head.split(',')
  return lines.map((line: string) => {
    const cells = line.split(',')
    return Object.fromEntries(cols.map((c: string, i: number) => [c, cells[i]]))
  })
}

describe('CLI/service cross-check at display precision', () => {
  it('stability curve matches the CLI stability sweep', () => {
    const csv = readCsv('stability_sweep.csv')
    const service = JSON.parse(
      readFileSync(join(FIXTURES, 'stability_curve.json'), 'utf-8'),
    ) as { result: { points: StabilityPoint[] } }
    const points = service.result.points
    expect(points.length).toBe(csv.length)
    points.forEach((pt, i) => {
      expect(sig4(pt.x)).toBe(sig4(Number(csv[i].p0)))
      expect(sig4(pt.values.q_crit)).toBe(sig4(Number(csv[i].q_crit)))
      expect(pt.values.mode_index).toBe(Number(csv[i].mode_index))
    })
    // the rendered segmentation reflects the CSV's mode column
    const segments = segmentByMode(points)
    const csvModes = [...new Set(csv.map((r) => r.mode_index))]
    expect(new Set(segments.map((s) => String(s.modeIndex)))).toEqual(new Set(csvModes))
  })

  it('damping curve matches the CLI damping sweep', () => {
    const csv = readCsv('damping_sweep.csv')
    const samples = JSON.parse(
      readFileSync(join(FIXTURES, 'eigen_sweep.json'), 'utf-8'),
    ) as { x: number; eigen: EigenResult }[]
    const curve = minDampingCurve(samples)
    expect(curve.length).toBe(csv.length)
    curve.forEach((pt, i) => {
      expect(sig4(pt.x)).toBe(sig4(Number(csv[i].p1)))
      expect(sig4(pt.y)).toBe(sig4(Number(csv[i].min_damping)))
    })
  })
})
