import { describe, expect, it } from 'vitest'

import { MAX_PINS, SessionState } from '../src/state'

const DOMAIN = { lower: [0, 0], upper: [1, 100] }

describe('SessionState', () => {
  it('starts at the domain midpoint', () => {
    const s = new SessionState('db', DOMAIN)
    expect(s.sliders).toEqual([0.5, 50])
  })

  it('clamps programmatic slider values to the box boundary', () => {
    const s = new SessionState('db', DOMAIN)
    expect(s.setSlider(0, 2.5)).toBe(1)
    expect(s.setSlider(0, -3)).toBe(0)
    expect(s.setSlider(1, 150)).toBe(100)
    expect(s.sliders).toEqual([0, 100])
  })

  it('clamps initial values too', () => {
    const s = new SessionState('db', DOMAIN, [9, -4])
    expect(s.sliders).toEqual([1, 0])
  })

  it('rejects out-of-range axes', () => {
    const s = new SessionState('db', DOMAIN)
    expect(() => s.setSlider(2, 0.1)).toThrow()
  })

  it('caps pinned snapshots at five', () => {
    const s = new SessionState('db', DOMAIN)
    for (let i = 0; i < MAX_PINS; i += 1) {
      expect(s.pinSnapshot({ label: `${i}`, sliders: [0, 0], curve: [] })).toBe(true)
    }
    expect(s.pinSnapshot({ label: 'six', sliders: [0, 0], curve: [] })).toBe(false)
    expect(s.pinned.length).toBe(MAX_PINS)
    s.unpin(0)
    expect(s.pinned.length).toBe(MAX_PINS - 1)
    expect(s.pinSnapshot({ label: 'again', sliders: [0, 0], curve: [] })).toBe(true)
  })
})
