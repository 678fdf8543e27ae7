/**
 * Typed client for the ROM-database query service.
 *
 * All endpoints are read-only (GET metadata, POST query); the client never
 * mutates server state. Every view issues queries through a LatestGate so a
 * response belonging to a superseded slider state is discarded.
 */

export interface DatabaseSummary {
  id: string
  kind: string
  k: number
  n_records: number
  n_params: number
  scalar_field: string
  consistency: { mode: string; reference_index: number | null }
  domain: { lower: number[]; upper: number[] }
}

export interface CurvePoint {
  x: number
  values: { re: number; im: number; db: number }[]
  valid: boolean
}

export interface StabilityPoint {
  x: number
  values: { q_crit: number; mode_index: number; tracking_ambiguous: boolean }
}

export interface EigenResult {
  eigenvalues: { re: number; im: number }[]
  damping_ratios: number[]
  frequencies: number[]
}

export interface QueryResponse<R> {
  database: string
  operation: string
  target: number[]
  consistency: { mode: string; reference_index: number | null }
  result: R
}

export interface ServiceErrorBody {
  error: string
  detail?: string
  field?: string
}

/** Error carrying the service's taxonomy name for inline display. */
export class ServiceError extends Error {
  readonly taxonomy: string
  readonly status: number

  constructor(status: number, body: ServiceErrorBody) {
    super(`${body.error}${body.detail ? `: ${body.detail}` : ''}`)
    this.taxonomy = body.error
    this.status = status
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  async listDatabases(): Promise<DatabaseSummary[]> {
    return this.get('/databases')
  }

  async meta(dbId: string): Promise<Record<string, unknown>> {
    return this.get(`/databases/${dbId}/meta`)
  }

  async query<R>(dbId: string, body: Record<string, unknown>): Promise<QueryResponse<R>> {
    const resp = await this.fetchFn(`${this.baseUrl}/databases/${dbId}/query`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
    const payload = await resp.json()
    if (!resp.ok) throw new ServiceError(resp.status, payload as ServiceErrorBody)
    return payload as QueryResponse<R>
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`)
    const payload = await resp.json()
    if (!resp.ok) throw new ServiceError(resp.status, payload as ServiceErrorBody)
    return payload as T
  }
}

/**
 * Monotone sequence gate: each in-flight request takes a ticket, and only
 * the holder of the newest ticket may apply its response.
 */
export class LatestGate {
  private current = 0

  next(): number {
    this.current += 1
    return this.current
  }

  isCurrent(ticket: number): boolean {
    return ticket === this.current
  }
}

/**
 * Issue a query through a gate; resolves to null when a newer request was
 * started before this response arrived (the stale response is dropped).
 */
export async function gatedQuery<R>(
  gate: LatestGate,
  run: () => Promise<R>,
): Promise<R | null> {
  const ticket = gate.next()
  const result = await run()
  return gate.isCurrent(ticket) ? result : null
}
