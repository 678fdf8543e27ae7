/**
 * Session state: selected database, slider values (always clamped to the
 * domain box), the active view, and up to five pinned comparison snapshots.
 */

export type ViewKind = 'stability_curve' | 'damping_vs_axis' | 'eigen_loci' | 'frequency_response'

export const MAX_PINS = 5

export interface PinnedSnapshot {
  label: string
  sliders: number[]
  curve: { x: number; y: number }[]
}

export interface DomainBox {
  lower: number[]
  upper: number[]
}

export class SessionState {
  databaseId: string
  readonly domain: DomainBox
  activeView: ViewKind = 'stability_curve'
  private sliderValues: number[]
  private pins: PinnedSnapshot[] = []

  constructor(databaseId: string, domain: DomainBox, initial?: number[]) {
    if (domain.lower.length !== domain.upper.length) {
      throw new Error('domain bounds must have equal length')
    }
    this.databaseId = databaseId
    this.domain = domain
    const mid = domain.lower.map((lo, i) => 0.5 * (lo + domain.upper[i]))
    this.sliderValues = (initial ?? mid).map((v, i) => this.clampAxis(i, v))
  }

  get sliders(): readonly number[] {
    return this.sliderValues
  }

  clampAxis(axis: number, value: number): number {
    const lo = this.domain.lower[axis]
    const hi = this.domain.upper[axis]
    return Math.min(hi, Math.max(lo, value))
  }

  /** Set one slider; out-of-box values land on the boundary. */
  setSlider(axis: number, value: number): number {
    if (axis < 0 || axis >= this.sliderValues.length) {
      throw new Error(`slider axis ${axis} out of range`)
    }
    const clamped = this.clampAxis(axis, value)
    this.sliderValues[axis] = clamped
    return clamped
  }

  get pinned(): readonly PinnedSnapshot[] {
    return this.pins
  }

  /** Pin the current curve for overlay comparison; capped at five pins. */
  pinSnapshot(snapshot: PinnedSnapshot): boolean {
    if (this.pins.length >= MAX_PINS) return false
    this.pins.push(snapshot)
    return true
  }

  unpin(index: number): void {
    this.pins.splice(index, 1)
  }
}
