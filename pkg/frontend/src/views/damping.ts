/**
 * Damping view: smallest damping ratio across a swept axis, with every sign
 * change highlighted (the stability boundary in damping terms).
 */

import type { EigenResult } from '../api'
import { sig4 } from '../format'
import {
  DEFAULT_GEOMETRY,
  MarkerSpec,
  Projector,
  extentOf,
  polylinePath,
  renderSvg,
} from '../plot'

export interface DampingSample {
  x: number
  eigen: EigenResult
}

export function minDampingCurve(samples: DampingSample[]): { x: number; y: number }[] {
  return samples.map((s) => ({ x: s.x, y: Math.min(...s.eigen.damping_ratios) }))
}

/** Linear-interpolated zero crossings of the min-damping curve. */
export function zeroCrossings(curve: { x: number; y: number }[]): number[] {
  const out: number[] = []
  for (let i = 1; i < curve.length; i += 1) {
    const a = curve[i - 1]
    const b = curve[i]
    if (a.y === 0) out.push(a.x)
    if (a.y * b.y < 0) {
      out.push(a.x + (b.x - a.x) * (a.y / (a.y - b.y)))
    }
  }
  if (curve.length && curve[curve.length - 1].y === 0) out.push(curve[curve.length - 1].x)
  return out
}

export function buildDampingView(samples: DampingSample[]): {
  svg: string
  curve: { x: number; y: number }[]
  crossings: number[]
  tooltip: string
} {
  const curve = minDampingCurve(samples)
  const extent = extentOf(curve.concat([{ x: curve[0]?.x ?? 0, y: 0 }]))
  const proj = new Projector(extent, DEFAULT_GEOMETRY)
  const crossings = zeroCrossings(curve)
  const markers: MarkerSpec[] = crossings.map((x) => ({
    x,
    y: 0,
    cssClass: 'zero-crossing',
    label: `damping crosses zero at ${sig4(x)}`,
  }))
  const svg = renderSvg(
    [{ d: polylinePath(curve, proj), cssClass: 'damping-curve' }],
    markers,
    proj,
    [{ x1: extent.xMin, y1: 0, x2: extent.xMax, y2: 0, cssClass: 'axis-line' }],
  )
  const worst = curve.reduce((m, p) => Math.min(m, p.y), Number.POSITIVE_INFINITY)
  return { svg, curve, crossings, tooltip: `min damping ${sig4(worst)}` }
}
