import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest'

import { DRAG_DEBOUNCE_MS, debounce } from '../src/debounce'

describe('debounce', () => {
  beforeEach(() => vi.useFakeTimers())
  afterEach(() => vi.useRealTimers())

  it('fires once, trailing, after the wait', () => {
    const calls: number[] = []
    const fn = debounce((v: number) => calls.push(v), DRAG_DEBOUNCE_MS)
    fn(1)
    fn(2)
    fn(3)
    vi.advanceTimersByTime(DRAG_DEBOUNCE_MS - 1)
    expect(calls).toEqual([])
    vi.advanceTimersByTime(1)
    expect(calls).toEqual([3])
  })

  it('restarts the window on every call during a drag', () => {
    const calls: number[] = []
    const fn = debounce((v: number) => calls.push(v), 150)
    fn(1)
    vi.advanceTimersByTime(100)
    fn(2)
    vi.advanceTimersByTime(100)
    expect(calls).toEqual([])
    vi.advanceTimersByTime(50)
    expect(calls).toEqual([2])
  })

  it('cancel drops the pending call (slider release path)', () => {
    const calls: number[] = []
    const fn = debounce((v: number) => calls.push(v), 150)
    fn(1)
    fn.cancel()
    vi.advanceTimersByTime(500)
    expect(calls).toEqual([])
  })

  it('flush fires the pending call immediately', () => {
    const calls: number[] = []
    const fn = debounce((v: number) => calls.push(v), 150)
    fn(7)
    fn.flush()
    expect(calls).toEqual([7])
    vi.advanceTimersByTime(500)
    expect(calls).toEqual([7])
  })
})
