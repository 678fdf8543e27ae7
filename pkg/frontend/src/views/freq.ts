/** Frequency-response view: log-scale output curve; resonance-flagged grid
 * points break the polyline instead of plotting bogus values. */

import type { CurvePoint } from '../api'
import { sig4 } from '../format'
import { DEFAULT_GEOMETRY, PathSpec, Projector, extentOf, polylinePath, renderSvg } from '../plot'

export function dbCurve(points: CurvePoint[], outputIndex = 0): { x: number; y: number }[][] {
  const runs: { x: number; y: number }[][] = []
  let current: { x: number; y: number }[] = []
  for (const pt of points) {
    if (!pt.valid) {
      if (current.length) runs.push(current)
      current = []
      continue
    }
    current.push({ x: pt.x, y: pt.values[outputIndex].db })
  }
  if (current.length) runs.push(current)
  return runs
}

export function buildFrequencyView(points: CurvePoint[], outputIndex = 0): {
  svg: string
  runs: { x: number; y: number }[][]
  tooltip: string
} {
  const runs = dbCurve(points, outputIndex)
  const flat = runs.flat()
  const extent = extentOf(flat.length ? flat : [{ x: 0, y: 0 }])
  const proj = new Projector(extent, DEFAULT_GEOMETRY)
  const paths: PathSpec[] = runs.map((run, i) => ({
    d: polylinePath(run, proj),
    cssClass: `db-curve run-${i}`,
  }))
  const peak = flat.reduce(
    (m, p) => (p.y > m.y ? p : m),
    flat[0] ?? { x: 0, y: Number.NEGATIVE_INFINITY },
  )
  return { svg: renderSvg(paths, [], proj), runs, tooltip: `peak ${sig4(peak.y)} dB at ${sig4(peak.x)}` }
}
