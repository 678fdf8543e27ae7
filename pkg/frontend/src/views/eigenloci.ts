/**
 * Eigenvalue-loci view: complex-plane trails of each tracked mode across a
 * sweep, with the imaginary axis drawn, the first mode to cross it
 * highlighted, and ambiguous tracking rendered as dashed trail segments.
 */

import type { EigenResult } from '../api'
import {
  DEFAULT_GEOMETRY,
  MarkerSpec,
  PathSpec,
  Projector,
  extentOf,
  renderSvg,
} from '../plot'

export interface LociSample {
  q: number
  eigen: EigenResult
}

export interface ModeTrail {
  modeIndex: number
  points: { re: number; im: number }[]
  /** per-step flag: matching to the previous sample was ambiguous */
  ambiguous: boolean[]
}

function matchGreedy(
  prev: { re: number; im: number }[],
  curr: { re: number; im: number }[],
): { assignment: number[]; ambiguous: boolean } {
  const n = prev.length
  const used = new Set<number>()
  const assignment = new Array<number>(n).fill(-1)
  // pairwise gap threshold: half the smallest distance among previous values
  let minGap = Number.POSITIVE_INFINITY
  for (let i = 0; i < n; i += 1) {
    for (let j = i + 1; j < n; j += 1) {
      minGap = Math.min(minGap, Math.hypot(prev[i].re - prev[j].re, prev[i].im - prev[j].im))
    }
  }
  const threshold = 0.5 * (Number.isFinite(minGap) ? minGap : 0)
  let ambiguous = false
  for (let i = 0; i < n; i += 1) {
    let best = -1
    let bestDist = Number.POSITIVE_INFINITY
    let second = Number.POSITIVE_INFINITY
    for (let j = 0; j < n; j += 1) {
      if (used.has(j)) continue
      const d = Math.hypot(prev[i].re - curr[j].re, prev[i].im - curr[j].im)
      if (d < bestDist) {
        second = bestDist
        bestDist = d
        best = j
      } else if (d < second) {
        second = d
      }
    }
    assignment[i] = best
    used.add(best)
    if (second - bestDist < threshold) ambiguous = true
  }
  return { assignment, ambiguous }
}

/** Connect eigenvalues across sweep samples into per-mode trails. */
export function trackTrails(samples: LociSample[]): ModeTrail[] {
  if (!samples.length) return []
  const first = samples[0].eigen.eigenvalues
  const trails: ModeTrail[] = first.map((ev, i) => ({
    modeIndex: i,
    points: [{ re: ev.re, im: ev.im }],
    ambiguous: [],
  }))
  let prevOrder = first.map((_, i) => i) // trail index occupying slot i
  let prev = first
  for (let s = 1; s < samples.length; s += 1) {
    const curr = samples[s].eigen.eigenvalues
    const { assignment, ambiguous } = matchGreedy(prev, curr)
    const nextOrder = new Array<number>(curr.length).fill(-1)
    for (let slot = 0; slot < prev.length; slot += 1) {
      const trail = trails[prevOrder[slot]]
      const target = assignment[slot]
      trail.points.push({ re: curr[target].re, im: curr[target].im })
      trail.ambiguous.push(ambiguous)
      nextOrder[target] = prevOrder[slot]
    }
    prevOrder = nextOrder
    prev = curr
  }
  return trails
}

/** Index of the first trail whose real part crosses zero, or null. */
export function firstCrossingTrail(trails: ModeTrail[]): number | null {
  let best: { trail: number; step: number } | null = null
  for (const trail of trails) {
    for (let s = 1; s < trail.points.length; s += 1) {
      if (trail.points[s - 1].re < 0 && trail.points[s].re >= 0) {
        if (!best || s < best.step) best = { trail: trail.modeIndex, step: s }
        break
      }
    }
  }
  return best ? best.trail : null
}

export function buildEigenLociView(samples: LociSample[]): {
  svg: string
  trails: ModeTrail[]
  highlighted: number | null
} {
  const trails = trackTrails(samples)
  const highlighted = firstCrossingTrail(trails)
  const flat = trails.flatMap((t) => t.points.map((p) => ({ x: p.re, y: p.im })))
  const extent = extentOf(flat.concat([{ x: 0, y: 0 }]))
  const proj = new Projector(extent, DEFAULT_GEOMETRY)
  const paths: PathSpec[] = []
  const markers: MarkerSpec[] = []
  for (const trail of trails) {
    // split into solid/dashed runs so ambiguity is visible per segment
    let runStart = 0
    for (let s = 1; s <= trail.points.length; s += 1) {
      const boundary =
        s === trail.points.length || (s > 0 && trail.ambiguous[s - 1] !== trail.ambiguous[runStart])
      if (!boundary) continue
      const pts = trail.points.slice(runStart, s + (s === trail.points.length ? 0 : 1))
      if (pts.length >= 2) {
        const d = pts
          .map(
            (p, i) =>
              `${i === 0 ? 'M' : 'L'}${proj.px(p.re).toFixed(2)},${proj.py(p.im).toFixed(2)}`,
          )
          .join(' ')
        paths.push({
          d,
          cssClass: `mode-trail mode-${trail.modeIndex}${
            trail.modeIndex === highlighted ? ' first-crossing' : ''
          }`,
          dashed: trail.ambiguous[runStart] ?? false,
        })
      }
      runStart = s
    }
    const tip = trail.points[trail.points.length - 1]
    markers.push({
      x: tip.re,
      y: tip.im,
      cssClass: `mode-tip mode-${trail.modeIndex}`,
      label: `mode ${trail.modeIndex}`,
    })
  }
  const svg = renderSvg(paths, markers, proj, [
    { x1: 0, y1: extent.yMin, x2: 0, y2: extent.yMax, cssClass: 'imaginary-axis' },
  ])
  return { svg, trails, highlighted }
}
