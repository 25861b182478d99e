/**
 * Typed client for the tray-tracking service API (/api/v1).
 *
 * Types mirror the server's response models field-for-field. Every number
 * shown anywhere in the dashboard originates from one of these responses —
 * the client never recomputes inventory math.
 */

export interface ChemicalRow {
  chemical_id: string;
  name: string;
  hazard_class: string;
  unit: string;
  reorder_lead_time_days: number;
  total_g: number;
  available_g: number;
  locations: string[];
  rate_g_per_day: number;
  days_to_empty: number | null;
  projected_empty: string | null;
}

export interface ChemicalsResponse {
  schema_version: number;
  total: number;
  offset: number;
  limit: number;
  chemicals: ChemicalRow[];
}

export interface HistoryEntry {
  tag_id: string;
  amount_g: number;
  user_badge: string | null;
  t_out: string;
  t_in: string;
  refill: boolean;
}

export interface HistoryResponse {
  schema_version: number;
  chemical_id: string;
  total: number;
  offset: number;
  limit: number;
  entries: HistoryEntry[];
  daily: Record<string, number>; // ISO date -> grams consumed that day
}

export interface EventOut {
  event_id: string;
  tray_id: string;
  kind: string;
  delta_g: number;
  tag_id: string | null;
  candidates: string[];
  candidates_removed: string[];
  candidates_returned: string[];
  user_badge: string | null;
  t_start: string;
  t_end: string;
  flags: string[];
}

export interface AmbiguousItem {
  event_id: string;
  status: string;
  event: EventOut;
}

export interface AmbiguousResponse {
  schema_version: number;
  total: number;
  offset: number;
  limit: number;
  items: AmbiguousItem[];
}

export interface ResolveResponse {
  schema_version: number;
  event_id: string;
  applied: EventOut[];
}

export interface AlertOut {
  chemical_id: string;
  name: string;
  remaining_g: number;
  rate_g_per_day: number;
  days_to_empty: number;
  projected_empty: string;
  reorder_lead_time_days: number;
}

export interface AlertsResponse {
  schema_version: number;
  alerts: AlertOut[];
}

export interface StatusResponse {
  schema_version: number;
  journal_len: number;
  audit_entries: number;
  trays: number;
  chemicals: number;
  containers: number;
  open_ambiguous: number;
  anomalies: number;
}

export interface RegisterContainerRequest {
  tag_id: string;
  chemical_id: string;
  tare_g: number;
  initial_gross_g: number;
}

export interface RegisterChemicalRequest {
  chemical_id: string;
  name: string;
  hazard_class?: string;
  unit?: string;
  reorder_lead_time_days?: number;
}

/** Error carrying the server's `detail` message for inline display. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let res: Response;
  try {
    res = await fetch(path, init);
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${err}`);
  }
  if (!res.ok) {
    let detail = `${res.status} ${res.statusText}`;
    try {
      const body = await res.json();
      if (typeof body?.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

function post<T>(path: string, body: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

export const api = {
  chemicals: (): Promise<ChemicalsResponse> =>
    request("/api/v1/chemicals?limit=1000"),

  history: (chemicalId: string, fromMs?: number, toMs?: number): Promise<HistoryResponse> => {
    const params = new URLSearchParams({ limit: "1000" });
    if (fromMs !== undefined) params.set("from_ms", String(fromMs));
    if (toMs !== undefined) params.set("to_ms", String(toMs));
    return request(`/api/v1/chemicals/${encodeURIComponent(chemicalId)}/history?${params}`);
  },

  ambiguous: (): Promise<AmbiguousResponse> =>
    request("/api/v1/ambiguous?limit=1000"),

  resolve: (eventId: string, attribution: { tag_id: string; delta_g: number }[]): Promise<ResolveResponse> =>
    post(`/api/v1/ambiguous/${encodeURIComponent(eventId)}/resolve`, { attribution }),

  alerts: (): Promise<AlertsResponse> => request("/api/v1/alerts"),

  status: (): Promise<StatusResponse> => request("/api/v1/status"),

  registerContainer: (body: RegisterContainerRequest) =>
    post<{ ok: boolean }>("/api/v1/containers", body),

  registerChemical: (body: RegisterChemicalRequest) =>
    post<{ ok: boolean }>("/api/v1/chemicals", body),
};

export type Api = typeof api;
