/**
 * Chemical index: one sortable, filterable row per chemical with remaining
 * quantity, locations, smoothed rate, and the days-to-empty projection.
 */

import type { Api, ChemicalRow } from "../api";
import { el, clear } from "../dom";
import {
  filterChemicals,
  fmtDays,
  fmtGrams,
  fmtRate,
  isUrgent,
  sortChemicals,
  type IndexState,
  type SortKey,
} from "../views";
import { errorBox } from "./shared";

const COLUMNS: { key: SortKey | null; label: string }[] = [
  { key: "name", label: "Chemical" },
  { key: "total_g", label: "Total" },
  { key: "available_g", label: "Available" },
  { key: null, label: "Locations" },
  { key: null, label: "Rate" },
  { key: "days_to_empty", label: "Days to empty" },
];

export async function renderChemicals(
  container: HTMLElement,
  api: Api,
  state: IndexState,
  opts: { onOpen: (chemicalId: string) => void; onStateChange: () => void },
): Promise<void> {
  let rows: ChemicalRow[];
  try {
    rows = (await api.chemicals()).chemicals;
  } catch (err) {
    clear(container);
    container.append(errorBox(err, () => renderChemicals(container, api, state, opts)));
    return;
  }

  clear(container);
  container.append(
    el(
      "div",
      { class: "toolbar" },
      el("input", {
        class: "filter",
        type: "search",
        placeholder: "Filter by name or id…",
        value: state.query,
        oninput: (ev) => {
          state.query = (ev.target as HTMLInputElement).value;
          opts.onStateChange();
        },
      }),
    ),
  );

  if (rows.length === 0) {
    container.append(el("p", { class: "empty" }, "No chemicals registered yet."));
    return;
  }

  const visible = sortChemicals(filterChemicals(rows, state.query), state.sortKey, state.descending);

  const thead = el(
    "tr",
    {},
    ...COLUMNS.map(({ key, label }) => {
      if (key === null) return el("th", {}, label);
      const active = state.sortKey === key;
      const arrow = active ? (state.descending ? " ↓" : " ↑") : "";
      return el(
        "th",
        {
          class: `sortable${active ? " active" : ""}`,
          onclick: () => {
            if (state.sortKey === key) state.descending = !state.descending;
            else (state.sortKey = key), (state.descending = false);
            opts.onStateChange();
          },
        },
        label + arrow,
      );
    }),
  );

  const body = visible.map((row) =>
    el(
      "tr",
      { class: "chem-row", onclick: () => opts.onOpen(row.chemical_id) },
      el(
        "td",
        {},
        el("div", { class: "chem-name" }, row.name),
        el("div", { class: "chem-id" }, row.chemical_id),
      ),
      el("td", { class: "num" }, fmtGrams(row.total_g)),
      el("td", { class: "num" }, fmtGrams(row.available_g)),
      el(
        "td",
        {},
        ...row.locations.map((loc) => el("span", { class: "chip" }, loc)),
      ),
      el("td", { class: "num" }, fmtRate(row.rate_g_per_day)),
      el(
        "td",
        {},
        el(
          "span",
          { class: `badge ${isUrgent(row) ? "badge-urgent" : "badge-ok"}` },
          fmtDays(row.days_to_empty),
        ),
      ),
    ),
  );

  container.append(el("table", { class: "data-table" }, el("thead", {}, thead), el("tbody", {}, ...body)));

  if (visible.length === 0) {
    container.append(el("p", { class: "empty" }, `Nothing matches “${state.query}”.`));
  }
}
