/**
 * Daily-consumption bar chart, rendered as inline SVG.
 *
 * Bars are the API's per-day totals exactly as served — a day dominated by a
 * refill arrives negative and is drawn below the zero line in the refill
 * color. Individual refill entries additionally get diamond marks under the
 * plot so added stock never visually mixes with usage.
 */

import { svg } from "./dom";
import type { Bar, RefillMark } from "./views";

const W = 720;
const H = 220;
const PAD = { top: 12, right: 12, bottom: 42, left: 48 };

export function renderChart(bars: Bar[], refills: RefillMark[]): SVGElement {
  const root = svg("svg", {
    viewBox: `0 0 ${W} ${H}`,
    class: "trend-chart",
    role: "img",
    "aria-label": "daily consumption",
  });
  if (bars.length === 0) return root;

  const innerW = W - PAD.left - PAD.right;
  const innerH = H - PAD.top - PAD.bottom;
  const hi = Math.max(0, ...bars.map((b) => b.grams));
  const lo = Math.min(0, ...bars.map((b) => b.grams));
  const span = Math.max(hi - lo, 1e-9);
  const y0 = PAD.top + (hi / span) * innerH; // the zero line
  const slot = innerW / bars.length;
  const barW = Math.min(28, slot * 0.7);

  root.append(
    svg("line", {
      x1: String(PAD.left),
      y1: y0.toFixed(1),
      x2: String(W - PAD.right),
      y2: y0.toFixed(1),
      class: "axis",
    }),
  );
  for (const [value, y] of [
    [hi, PAD.top + 10],
    [lo, PAD.top + innerH],
  ] as const) {
    if (value === 0) continue;
    const label = svg("text", {
      x: String(PAD.left - 6),
      y: String(y),
      class: "tick",
      "text-anchor": "end",
    });
    label.textContent = value.toFixed(1);
    root.append(label);
  }

  bars.forEach((bar, i) => {
    const x = PAD.left + i * slot + (slot - barW) / 2;
    const h = (Math.abs(bar.grams) / span) * innerH;
    const rect = svg("rect", {
      x: x.toFixed(1),
      y: (bar.grams >= 0 ? y0 - h : y0).toFixed(1),
      width: barW.toFixed(1),
      height: h.toFixed(1),
      class: bar.grams < 0 ? "bar bar-neg" : "bar",
      "data-date": bar.date,
      "data-grams": String(bar.grams),
    });
    const title = svg("title");
    title.textContent = `${bar.date}: ${bar.grams.toFixed(2)} g`;
    rect.append(title);
    root.append(rect);

    // x labels: thin out to at most ~10 so they stay readable
    const every = Math.max(1, Math.ceil(bars.length / 10));
    if (i % every === 0) {
      const label = svg("text", {
        x: (x + barW / 2).toFixed(1),
        y: String(PAD.top + innerH + 16),
        class: "tick",
        "text-anchor": "middle",
      });
      label.textContent = bar.date.slice(5); // MM-DD
      root.append(label);
    }
  });

  // refill marks on their day, below the plot
  const dateX = new Map(bars.map((b, i) => [b.date, PAD.left + i * slot + slot / 2]));
  for (const mark of refills) {
    const x = dateX.get(mark.date);
    if (x === undefined) continue;
    const y = PAD.top + innerH + 26;
    const diamond = svg("path", {
      d: `M ${x} ${y - 5} l 5 5 l -5 5 l -5 -5 z`,
      class: "refill-mark",
      "data-date": mark.date,
      "data-grams": String(mark.grams),
    });
    const title = svg("title");
    title.textContent = `refill ${mark.tag_id} on ${mark.date}: ${Math.abs(mark.grams).toFixed(2)} g added`;
    diamond.append(title);
    root.append(diamond);
  }
  return root;
}
