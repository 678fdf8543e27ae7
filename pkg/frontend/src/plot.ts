/**
 * Minimal SVG chart builder. Pure string output so views are testable
 * without a DOM; main.ts injects the markup into the page.
 */

export interface Extent {
  xMin: number
  xMax: number
  yMin: number
  yMax: number
}

export interface PlotGeometry {
  width: number
  height: number
  margin: number
}

export const DEFAULT_GEOMETRY: PlotGeometry = { width: 640, height: 360, margin: 42 }

export function extentOf(points: { x: number; y: number }[], pad = 0.05): Extent {
  const xs = points.map((p) => p.x)
  const ys = points.map((p) => p.y)
  const xMin = Math.min(...xs)
  const xMax = Math.max(...xs)
  const yMin = Math.min(...ys)
  const yMax = Math.max(...ys)
  const dy = (yMax - yMin || 1) * pad
  const dx = (xMax - xMin || 1) * pad
  return { xMin: xMin - dx, xMax: xMax + dx, yMin: yMin - dy, yMax: yMax + dy }
}

export function mergeExtents(a: Extent, b: Extent): Extent {
  return {
    xMin: Math.min(a.xMin, b.xMin),
    xMax: Math.max(a.xMax, b.xMax),
    yMin: Math.min(a.yMin, b.yMin),
    yMax: Math.max(a.yMax, b.yMax),
  }
}

export class Projector {
  constructor(
    readonly extent: Extent,
    readonly geom: PlotGeometry = DEFAULT_GEOMETRY,
  ) {}

  px(x: number): number {
    const { width, margin } = this.geom
    const t = (x - this.extent.xMin) / (this.extent.xMax - this.extent.xMin)
    return margin + t * (width - 2 * margin)
  }

  py(y: number): number {
    const { height, margin } = this.geom
    const t = (y - this.extent.yMin) / (this.extent.yMax - this.extent.yMin)
    return height - margin - t * (height - 2 * margin)
  }
}

export function polylinePath(points: { x: number; y: number }[], proj: Projector): string {
  return points
    .map((p, i) => `${i === 0 ? 'M' : 'L'}${proj.px(p.x).toFixed(2)},${proj.py(p.y).toFixed(2)}`)
    .join(' ')
}

export interface PathSpec {
  d: string
  cssClass: string
  dashed?: boolean
}

export interface MarkerSpec {
  x: number
  y: number
  cssClass: string
  label?: string
}

export function renderSvg(
  paths: PathSpec[],
  markers: MarkerSpec[],
  proj: Projector,
  extraLines: { x1: number; y1: number; x2: number; y2: number; cssClass: string }[] = [],
): string {
  const { width, height } = proj.geom
  const parts: string[] = [
    `<svg viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">`,
  ]
  for (const line of extraLines) {
    parts.push(
      `<line x1="${proj.px(line.x1).toFixed(2)}" y1="${proj.py(line.y1).toFixed(2)}"` +
        ` x2="${proj.px(line.x2).toFixed(2)}" y2="${proj.py(line.y2).toFixed(2)}"` +
        ` class="${line.cssClass}"/>`,
    )
  }
  for (const path of paths) {
    const dash = path.dashed ? ' stroke-dasharray="6 4"' : ''
    parts.push(`<path d="${path.d}" class="${path.cssClass}" fill="none"${dash}/>`)
  }
  for (const m of markers) {
    parts.push(
      `<circle cx="${proj.px(m.x).toFixed(2)}" cy="${proj.py(m.y).toFixed(2)}" r="5"` +
        ` class="${m.cssClass}">` +
        (m.label ? `<title>${m.label}</title>` : '') +
        `</circle>`,
    )
  }
  parts.push('</svg>')
  return parts.join('')
}
