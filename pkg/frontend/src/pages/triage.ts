/**
 * Ambiguity triage: parked events the engine refused to guess about.
 *
 * The reviewer splits the observed weight change across candidate
 * containers. Submission stays disabled until the shares would pass the
 * server's own checks (sum within tolerance, signs consistent with which
 * tags moved); the item is removed only after the server confirms, and a
 * rejection is shown inline next to the form that caused it.
 */

import { ApiError, type AmbiguousItem, type Api } from "../api";
import { el, clear } from "../dom";
import { fmtGrams, fmtWhen, validateResolution, type Share } from "../views";
import { errorBox } from "./shared";

function direction(item: AmbiguousItem, tag: string): string {
  if (item.event.candidates_removed.includes(tag)) return "left the tray";
  if (item.event.candidates_returned.includes(tag)) return "arrived";
  return "in place";
}

export async function renderTriage(
  container: HTMLElement,
  api: Api,
  opts: { onResolved: () => void },
): Promise<void> {
  let items: AmbiguousItem[];
  try {
    items = (await api.ambiguous()).items;
  } catch (err) {
    clear(container);
    container.append(errorBox(err, () => renderTriage(container, api, opts)));
    return;
  }

  clear(container);
  container.append(el("h2", {}, "Needs review"));
  if (items.length === 0) {
    container.append(el("p", { class: "empty" }, "Nothing waiting for review."));
    return;
  }
  for (const item of items) {
    container.append(triageCard(item, api, opts.onResolved));
  }
}

function triageCard(item: AmbiguousItem, api: Api, onResolved: () => void): HTMLElement {
  const ev = item.event;
  const inputs = new Map<string, HTMLInputElement>();
  // No candidates means no tag was readable during the event; the reviewer
  // names the container themselves.
  let freeTag: HTMLInputElement | null = null;
  let freeGrams: HTMLInputElement | null = null;
  const residualLine = el("p", { class: "residual" });
  const serverError = el("p", { class: "server-error", role: "alert" });
  const submit = el("button", { class: "btn btn-primary", disabled: "" }, "Apply") as HTMLButtonElement;

  const shares = (): Share[] => {
    if (freeTag && freeGrams) {
      if (freeTag.value.trim() === "" || freeGrams.value.trim() === "") return [];
      return [{ tag_id: freeTag.value.trim(), delta_g: Number(freeGrams.value) }];
    }
    return [...inputs.entries()]
      .filter(([, input]) => input.value.trim() !== "")
      .map(([tag_id, input]) => ({ tag_id, delta_g: Number(input.value) }));
  };

  const revalidate = () => {
    const v = validateResolution(ev, shares());
    residualLine.textContent = v.ok
      ? `Balanced: shares cover ${fmtGrams(ev.delta_g)}.`
      : v.problems[0];
    residualLine.className = `residual ${v.ok ? "residual-ok" : "residual-bad"}`;
    if (v.ok) submit.removeAttribute("disabled");
    else submit.setAttribute("disabled", "");
  };

  const fields = ev.candidates.map((tag) => {
    const input = el("input", {
      class: "share-input",
      type: "number",
      step: "any",
      placeholder: "grams",
      "data-tag": tag,
      oninput: revalidate,
    }) as HTMLInputElement;
    inputs.set(tag, input);
    return el(
      "label",
      { class: "share-field" },
      el("span", { class: "share-tag" }, tag),
      el("span", { class: "share-dir" }, direction(item, tag)),
      input,
    );
  });
  if (fields.length === 0) {
    freeTag = el("input", {
      class: "share-input",
      type: "text",
      placeholder: "C:tag",
      oninput: revalidate,
    }) as HTMLInputElement;
    freeGrams = el("input", {
      class: "share-input",
      type: "number",
      step: "any",
      placeholder: "grams",
      oninput: revalidate,
    }) as HTMLInputElement;
    fields.push(
      el(
        "label",
        { class: "share-field" },
        el("span", { class: "share-tag" }, "container"),
        el("span", { class: "share-dir" }, "no tag was read; name the container"),
        freeTag,
        freeGrams,
      ),
    );
  }

  submit.addEventListener("click", async () => {
    submit.setAttribute("disabled", "");
    serverError.textContent = "";
    try {
      await api.resolve(item.event_id, shares());
    } catch (err) {
      // Leave the card in place; show exactly what the server said.
      serverError.textContent = err instanceof ApiError ? err.message : String(err);
      revalidate();
      return;
    }
    onResolved();
  });

  revalidate();
  return el(
    "div",
    { class: "card triage-card", "data-event-id": item.event_id },
    el(
      "div",
      { class: "card-head" },
      el("span", { class: "badge badge-amb" }, ev.kind),
      el("strong", {}, fmtGrams(ev.delta_g)),
      el("span", { class: "muted" }, `tray ${ev.tray_id}`),
      el("span", { class: "muted when" }, fmtWhen(ev.t_start)),
      ...ev.flags.map((f) => el("span", { class: "chip chip-flag" }, f)),
    ),
    ev.user_badge ? el("p", { class: "muted" }, `badge seen: ${ev.user_badge}`) : null,
    el("div", { class: "share-grid" }, ...fields),
    residualLine,
    serverError,
    submit,
  );
}
