/**
 * DOM wiring: sliders per parameter axis, view tabs, pins, and the error
 * panel. All numeric displays go through the 4-significant-digit formatter;
 * queries run through per-view gates so only the latest slider state is
 * ever rendered.
 */

import {
  CurvePoint,
  EigenResult,
  LatestGate,
  ServiceClient,
  ServiceError,
  StabilityPoint,
  gatedQuery,
} from './api'
import { DRAG_DEBOUNCE_MS, debounce } from './debounce'
import { sig4 } from './format'
import { SessionState, ViewKind } from './state'
import { buildDampingView } from './views/damping'
import { buildEigenLociView } from './views/eigenloci'
import { buildFrequencyView } from './views/freq'
import { buildStabilityView } from './views/stability'

const SWEEP_SAMPLES = 26
const LOCI_SAMPLES = 15

const client = new ServiceClient('')
const gate = new LatestGate()

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing element #${id}`)
  return node as T
}

function showError(message: string | null): void {
  const panel = el<HTMLDivElement>('error-panel')
  panel.textContent = message ?? ''
  panel.style.display = message ? 'block' : 'none'
}

async function sweepEigen(
  state: SessionState,
  axis: number,
  samples: number,
): Promise<{ x: number; eigen: EigenResult }[]> {
  const lo = state.domain.lower[axis]
  const hi = state.domain.upper[axis]
  const xs = Array.from({ length: samples }, (_, i) => lo + ((hi - lo) * i) / (samples - 1))
  const out: { x: number; eigen: EigenResult }[] = []
  for (const x of xs) {
    const coords = [...state.sliders]
    coords[axis] = x
    const resp = await client.query<EigenResult>(state.databaseId, {
      target: { coords },
      operation: 'eigen',
    })
    out.push({ x, eigen: resp.result })
  }
  return out
}

async function renderActiveView(state: SessionState): Promise<void> {
  const plot = el<HTMLDivElement>('plot')
  const tooltip = el<HTMLDivElement>('tooltip')
  try {
    const rendered = await gatedQuery(gate, async () => {
      switch (state.activeView) {
        case 'stability_curve': {
          const resp = await client.query<{ points: StabilityPoint[] }>(state.databaseId, {
            target: { coords: [...state.sliders] },
            operation: 'stability_curve',
            stability_curve: { axis: 0, samples: SWEEP_SAMPLES, crit_axis: 1 },
          })
          const view = buildStabilityView(resp.result.points, state.pinned)
          return { svg: view.svg, tooltip: view.tooltip }
        }
        case 'damping_vs_axis': {
          const samples = await sweepEigen(state, 1, LOCI_SAMPLES)
          const view = buildDampingView(samples)
          return { svg: view.svg, tooltip: view.tooltip }
        }
        case 'eigen_loci': {
          const samples = await sweepEigen(state, 1, LOCI_SAMPLES)
          const view = buildEigenLociView(
            samples.map((s) => ({ q: s.x, eigen: s.eigen })),
          )
          return {
            svg: view.svg,
            tooltip:
              view.highlighted === null
                ? 'no crossing in range'
                : `first crossing: mode ${view.highlighted}`,
          }
        }
        case 'frequency_response': {
          const resp = await client.query<{ curve: CurvePoint[] }>(state.databaseId, {
            target: { coords: [...state.sliders] },
            operation: 'frequency_response',
            frequency_response: { grid: Array.from({ length: 40 }, (_, i) => 0.2 + i * 0.05) },
          })
          const view = buildFrequencyView(resp.result.curve)
          return { svg: view.svg, tooltip: view.tooltip }
        }
      }
    })
    if (rendered === null) return // superseded by a newer slider state
    plot.innerHTML = rendered.svg
    tooltip.textContent = rendered.tooltip
    showError(null)
  } catch (err) {
    if (err instanceof ServiceError) {
      showError(`service error [${err.taxonomy}]: ${err.message}`)
    } else {
      showError(String(err))
    }
  }
}

function buildSliders(state: SessionState): void {
  const host = el<HTMLDivElement>('sliders')
  host.innerHTML = ''
  const refresh = () => void renderActiveView(state)
  const debounced = debounce(refresh, DRAG_DEBOUNCE_MS)
  state.domain.lower.forEach((lo, axis) => {
    const hi = state.domain.upper[axis]
    const row = document.createElement('div')
    row.className = 'slider-row'
    const label = document.createElement('label')
    label.textContent = `axis ${axis}`
    const value = document.createElement('span')
    value.textContent = sig4(state.sliders[axis])
    const input = document.createElement('input')
    input.type = 'range'
    input.min = String(lo)
    input.max = String(hi)
    input.step = String((hi - lo) / 200)
    input.value = String(state.sliders[axis])
    input.addEventListener('input', () => {
      const v = state.setSlider(axis, Number(input.value))
      value.textContent = sig4(v)
      debounced()
    })
    input.addEventListener('change', () => {
      debounced.cancel()
      refresh()
    })
    row.append(label, input, value)
    host.append(row)
  })
}

function buildViewTabs(state: SessionState): void {
  const views: ViewKind[] = [
    'stability_curve',
    'damping_vs_axis',
    'eigen_loci',
    'frequency_response',
  ]
  const host = el<HTMLDivElement>('view-tabs')
  host.innerHTML = ''
  for (const view of views) {
    const btn = document.createElement('button')
    btn.textContent = view.split('_').join(' ')
    btn.addEventListener('click', () => {
      state.activeView = view
      void renderActiveView(state)
    })
    host.append(btn)
  }
}

async function boot(): Promise<void> {
  try {
    const dbs = await client.listDatabases()
    if (!dbs.length) {
      showError('no databases loaded on the service')
      return
    }
    const db = dbs[0]
    el<HTMLSpanElement>('db-label').textContent =
      `${db.id} (k=${db.k}, ${db.n_records} records, alignment: ${db.consistency.mode})`
    const state = new SessionState(db.id, db.domain)
    buildSliders(state)
    buildViewTabs(state)
    el<HTMLButtonElement>('pin-button').addEventListener('click', () => {
      void (async () => {
        const resp = await client.query<{ points: StabilityPoint[] }>(state.databaseId, {
          target: { coords: [...state.sliders] },
          operation: 'stability_curve',
          stability_curve: { axis: 0, samples: SWEEP_SAMPLES, crit_axis: 1 },
        })
        const ok = state.pinSnapshot({
          label: state.sliders.map(sig4).join(', '),
          sliders: [...state.sliders],
          curve: resp.result.points.map((p) => ({ x: p.x, y: p.values.q_crit })),
        })
        if (!ok) showError('pin limit reached (5)')
        else void renderActiveView(state)
      })()
    })
    await renderActiveView(state)
  } catch (err) {
    showError(err instanceof ServiceError ? `service error [${err.taxonomy}]` : String(err))
  }
}

void boot()
