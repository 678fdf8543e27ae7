/** Numeric display: everything user-visible is fixed to 4 significant digits
 * so CLI/UI cross-checks stay legible. */

export function sig4(x: number): string {
  if (!Number.isFinite(x)) return String(x)
  if (x === 0) return '0.000'
  return x.toPrecision(4)
}

/** Parse-normalized value at display precision (for cross-check tests). */
export function sig4Value(x: number): number {
  return Number.parseFloat(sig4(x))
}
