/**
 * Pure view-model helpers: sorting, filtering, formatting, chart series,
 * and triage-resolution validation.
 *
 * Nothing here recomputes inventory quantities — every gram, rate, or date
 * shown on screen is an API value, at most reformatted for display. The one
 * piece of arithmetic is the triage residual, which deliberately mirrors the
 * server's acceptance rule so the form never green-lights a resolution the
 * server would bounce.
 */

import type { ChemicalRow, EventOut, HistoryEntry } from "./api";

// Same tolerance the server applies to Σ(shares) vs the event delta.
export const RESOLUTION_SUM_TOL_G = 0.01;

// --- routing ---

export type Route =
  | { page: "chemicals" }
  | { page: "trend"; chemicalId: string }
  | { page: "triage" }
  | { page: "register" };

export function parseRoute(hash: string): Route {
  const parts = hash.replace(/^#\/?/, "").split("/");
  if (parts[0] === "trend" && parts[1]) return { page: "trend", chemicalId: decodeURIComponent(parts[1]) };
  if (parts[0] === "triage") return { page: "triage" };
  if (parts[0] === "register") return { page: "register" };
  return { page: "chemicals" };
}

// --- formatting ---

export function fmtGrams(g: number): string {
  return `${g.toFixed(2)} g`;
}

export function fmtRate(gPerDay: number): string {
  return `${gPerDay.toFixed(2)} g/day`;
}

export function fmtDays(days: number | null): string {
  if (days === null) return "—";
  if (days > 3650) return "10y+";
  return `${days.toFixed(1)} d`;
}

export function fmtWhen(iso: string): string {
  // 2026-01-01T00:00:09.800Z -> "2026-01-01 00:00:09"
  return iso.replace("T", " ").slice(0, 19);
}

// --- chemical index ---

export type SortKey = "name" | "total_g" | "available_g" | "days_to_empty";

export interface IndexState {
  query: string;
  sortKey: SortKey;
  descending: boolean;
}

export function filterChemicals(rows: ChemicalRow[], query: string): ChemicalRow[] {
  const q = query.trim().toLowerCase();
  if (!q) return rows;
  return rows.filter(
    (r) => r.name.toLowerCase().includes(q) || r.chemical_id.toLowerCase().includes(q),
  );
}

export function sortChemicals(rows: ChemicalRow[], key: SortKey, descending: boolean): ChemicalRow[] {
  const sorted = [...rows].sort((a, b) => {
    let cmp: number;
    if (key === "name") {
      cmp = a.name.localeCompare(b.name);
    } else if (key === "days_to_empty") {
      // null means "not depleting" — sort it after every finite projection
      const av = a.days_to_empty ?? Infinity;
      const bv = b.days_to_empty ?? Infinity;
      cmp = av - bv;
    } else {
      cmp = a[key] - b[key];
    }
    return cmp === 0 ? a.chemical_id.localeCompare(b.chemical_id) : cmp;
  });
  return descending ? sorted.reverse() : sorted;
}

/** Presentation-only: does this row's projection fall inside its lead time? */
export function isUrgent(row: ChemicalRow): boolean {
  return row.days_to_empty !== null && row.days_to_empty <= row.reorder_lead_time_days;
}

// --- consumption trend ---

export interface Bar {
  date: string; // ISO day
  grams: number; // the API's daily total, verbatim
}

export interface RefillMark {
  date: string;
  grams: number; // the entry's amount_g, verbatim (negative = grams added)
  tag_id: string;
}

/**
 * Turn the API's daily map into chart bars for the `windowDays` days ending
 * at `anchorDay` (0 = everything, anchor defaults to today UTC). Bars carry
 * API values untouched; the window only decides which dates are visible, so
 * a window that reaches back past all activity yields an empty chart.
 */
export function dailyBars(
  daily: Record<string, number>,
  windowDays: number,
  anchorDay: string = new Date().toISOString().slice(0, 10),
): Bar[] {
  let dates = Object.keys(daily).sort();
  if (windowDays > 0) {
    const cutoff = addDays(anchorDay, -(windowDays - 1));
    dates = dates.filter((d) => d >= cutoff);
  }
  return dates.map((date) => ({ date, grams: daily[date] }));
}

/** One mark per refill entry, placed on its return day. */
export function refillMarks(entries: HistoryEntry[], bars: Bar[]): RefillMark[] {
  if (bars.length === 0) return [];
  const first = bars[0].date;
  const last = bars[bars.length - 1].date;
  return entries
    .filter((e) => e.refill)
    .map((e) => ({ date: e.t_in.slice(0, 10), grams: e.amount_g, tag_id: e.tag_id }))
    .filter((m) => m.date >= first && m.date <= last);
}

function addDays(isoDay: string, days: number): string {
  const d = new Date(`${isoDay}T00:00:00Z`);
  d.setUTCDate(d.getUTCDate() + days);
  return d.toISOString().slice(0, 10);
}

// --- triage resolution validation ---

export interface Share {
  tag_id: string;
  // What the user typed; NaN while the field is blank or unparsable.
  delta_g: number;
}

export interface Validation {
  ok: boolean;
  /** event delta minus the sum of shares (meaningful even when not ok) */
  residual_g: number;
  problems: string[];
}

/**
 * Client-side mirror of the server's resolution checks: the shares must sum
 * to the event's delta within RESOLUTION_SUM_TOL_G, each tag may appear
 * once, every tag must be one of the event's candidates, and shares for
 * tags that departed (candidates_removed) must be negative while shares for
 * tags that appeared (candidates_returned) must be positive.
 */
export function validateResolution(event: EventOut, shares: Share[]): Validation {
  const problems: string[] = [];
  let sum = 0;
  for (const s of shares) sum += s.delta_g;
  const residual = event.delta_g - sum;

  if (shares.length === 0) problems.push("attribute the change to at least one container");
  const seen = new Set<string>();
  for (const s of shares) {
    if (!Number.isFinite(s.delta_g)) {
      problems.push(`enter a number for ${s.tag_id}`);
      continue;
    }
    if (seen.has(s.tag_id)) problems.push(`${s.tag_id} is listed twice`);
    seen.add(s.tag_id);
    if (event.candidates.length > 0 && !event.candidates.includes(s.tag_id)) {
      problems.push(`${s.tag_id} is not a candidate of this event`);
    }
    if (event.candidates_removed.includes(s.tag_id) && s.delta_g >= 0) {
      problems.push(`${s.tag_id} left the tray, so its share must be negative`);
    }
    if (event.candidates_returned.includes(s.tag_id) && s.delta_g <= 0) {
      problems.push(`${s.tag_id} arrived on the tray, so its share must be positive`);
    }
  }
  if (!Number.isFinite(residual) || Math.abs(residual) > RESOLUTION_SUM_TOL_G) {
    problems.push(`shares must sum to ${event.delta_g.toFixed(4)} g (off by ${residual.toFixed(4)} g)`);
  }
  return { ok: problems.length === 0, residual_g: residual, problems };
}
