/**
 * Consumption trend for one chemical: daily-total bars over a selectable
 * window plus the raw ledger entries (refills tagged, badges shown).
 */

import type { Api, HistoryResponse } from "../api";
import { renderChart } from "../chart";
import { el, clear } from "../dom";
import { dailyBars, fmtGrams, fmtWhen, refillMarks } from "../views";
import { errorBox } from "./shared";

const WINDOWS = [
  { days: 7, label: "7 days" },
  { days: 30, label: "30 days" },
  { days: 90, label: "90 days" },
  { days: 0, label: "all" },
];

export async function renderTrend(
  container: HTMLElement,
  api: Api,
  chemicalId: string,
  state: { windowDays: number },
  opts: { onBack: () => void; onStateChange: () => void },
): Promise<void> {
  let history: HistoryResponse;
  try {
    history = await api.history(chemicalId);
  } catch (err) {
    clear(container);
    container.append(errorBox(err, () => renderTrend(container, api, chemicalId, state, opts)));
    return;
  }

  clear(container);
  container.append(
    el(
      "div",
      { class: "toolbar" },
      el("button", { class: "btn btn-ghost", onclick: opts.onBack }, "← all chemicals"),
      el("h2", {}, chemicalId),
      el(
        "div",
        { class: "window-picker" },
        ...WINDOWS.map(({ days, label }) =>
          el(
            "button",
            {
              class: `btn btn-ghost${state.windowDays === days ? " active" : ""}`,
              onclick: () => {
                state.windowDays = days;
                opts.onStateChange();
              },
            },
            label,
          ),
        ),
      ),
    ),
  );

  const bars = dailyBars(history.daily, state.windowDays);
  if (bars.length === 0) {
    container.append(el("p", { class: "empty" }, "No consumption recorded in this window."));
  } else {
    container.append(renderChart(bars, refillMarks(history.entries, bars)));
  }

  if (history.entries.length === 0) return;
  const rows = history.entries.map((e) =>
    el(
      "tr",
      { class: e.refill ? "refill-row" : "" },
      el("td", {}, e.tag_id),
      el(
        "td",
        { class: "num" },
        e.refill
          ? el("span", { class: "chip chip-refill" }, `refill ${fmtGrams(Math.abs(e.amount_g))}`)
          : fmtGrams(e.amount_g),
      ),
      el("td", {}, e.user_badge ?? "—"),
      el("td", { class: "when" }, fmtWhen(e.t_out)),
      el("td", { class: "when" }, fmtWhen(e.t_in)),
    ),
  );
  container.append(
    el(
      "table",
      { class: "data-table" },
      el(
        "thead",
        {},
        el(
          "tr",
          {},
          el("th", {}, "Container"),
          el("th", {}, "Amount"),
          el("th", {}, "User"),
          el("th", {}, "Out"),
          el("th", {}, "In"),
        ),
      ),
      el("tbody", {}, ...rows),
    ),
  );
}
