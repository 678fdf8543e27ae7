/**
 * Stability view: critical sweep value per primary-axis sample. A change of
 * the crossing-mode index between adjacent samples is a bifurcation cue and
 * is rendered as a marked discontinuity between separate curve segments.
 */

import type { StabilityPoint } from '../api'
import { sig4 } from '../format'
import {
  DEFAULT_GEOMETRY,
  MarkerSpec,
  PathSpec,
  Projector,
  extentOf,
  mergeExtents,
  polylinePath,
  renderSvg,
} from '../plot'
import type { PinnedSnapshot } from '../state'

export interface StabilitySegment {
  modeIndex: number
  points: { x: number; y: number }[]
}

/** Split the curve wherever the crossing-mode index jumps. */
export function segmentByMode(points: StabilityPoint[]): StabilitySegment[] {
  const segments: StabilitySegment[] = []
  for (const pt of points) {
    const last = segments[segments.length - 1]
    const xy = { x: pt.x, y: pt.values.q_crit }
    if (last && last.modeIndex === pt.values.mode_index) {
      last.points.push(xy)
    } else {
      segments.push({ modeIndex: pt.values.mode_index, points: [xy] })
    }
  }
  return segments
}

/** Midpoints between segments, where the bifurcation markers go. */
export function bifurcationMarkers(segments: StabilitySegment[]): MarkerSpec[] {
  const markers: MarkerSpec[] = []
  for (let i = 1; i < segments.length; i += 1) {
    const prev = segments[i - 1].points
    const next = segments[i].points
    const a = prev[prev.length - 1]
    const b = next[0]
    markers.push({
      x: 0.5 * (a.x + b.x),
      y: 0.5 * (a.y + b.y),
      cssClass: 'bifurcation-marker',
      label: `mode ${segments[i - 1].modeIndex} → ${segments[i].modeIndex}`,
    })
  }
  return markers
}

export function buildStabilityView(
  points: StabilityPoint[],
  pins: readonly PinnedSnapshot[] = [],
): { svg: string; segments: StabilitySegment[]; tooltip: string } {
  const segments = segmentByMode(points)
  const all = points.map((p) => ({ x: p.x, y: p.values.q_crit }))
  let extent = extentOf(all)
  for (const pin of pins) {
    if (pin.curve.length) extent = mergeExtents(extent, extentOf(pin.curve))
  }
  const proj = new Projector(extent, DEFAULT_GEOMETRY)
  const paths: PathSpec[] = segments.map((seg, i) => ({
    d: polylinePath(seg.points, proj),
    cssClass: `stability-segment mode-${seg.modeIndex} seg-${i}`,
  }))
  pins.forEach((pin, i) => {
    paths.push({ d: polylinePath(pin.curve, proj), cssClass: `pinned pin-${i}`, dashed: true })
  })
  const markers = bifurcationMarkers(segments)
  const last = all[all.length - 1]
  const tooltip = last ? `q_crit ${sig4(last.y)} at x ${sig4(last.x)}` : ''
  return { svg: renderSvg(paths, markers, proj), segments, tooltip }
}
