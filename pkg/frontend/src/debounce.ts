/** Trailing debounce used while a slider is being dragged (150 ms default). */

export const DRAG_DEBOUNCE_MS = 150

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number = DRAG_DEBOUNCE_MS,
): { (...args: A): void; cancel(): void; flush(): void } {
  let timer: ReturnType<typeof setTimeout> | null = null
  let pending: A | null = null

  const wrapped = (...args: A) => {
    pending = args
    if (timer !== null) clearTimeout(timer)
    timer = setTimeout(() => {
      timer = null
      const args2 = pending as A
      pending = null
      fn(...args2)
    }, waitMs)
  }
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer)
    timer = null
    pending = null
  }
  wrapped.flush = () => {
    if (timer !== null) {
      clearTimeout(timer)
      timer = null
      if (pending !== null) {
        const args = pending
        pending = null
        fn(...args)
      }
    }
  }
  return wrapped
}
