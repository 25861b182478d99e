import { ApiError } from "../api";
import { el } from "../dom";

/** Visible failure state with a retry button — never a blank page. */
export function errorBox(err: unknown, retry: () => void): HTMLElement {
  const message = err instanceof ApiError ? err.message : String(err);
  return el(
    "div",
    { class: "error-box", role: "alert" },
    el("p", {}, "Could not reach the tray service."),
    el("p", { class: "error-detail" }, message),
    el("button", { class: "btn", onclick: retry }, "Retry"),
  );
}
