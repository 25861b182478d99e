/**
 * App shell: hash routing, a nav bar with the live review count, and a 5 s
 * poll that re-renders the current page — paused whenever the user is in the
 * middle of typing so a refresh never eats a half-entered form.
 */

import { api } from "./api";
import { el } from "./dom";
import { renderChemicals } from "./pages/chemicals";
import { renderRegister } from "./pages/register";
import { renderTrend } from "./pages/trend";
import { renderTriage } from "./pages/triage";
import { parseRoute, type IndexState, type Route } from "./views";
import "./style.css";

const POLL_MS = 5000;

const indexState: IndexState = { query: "", sortKey: "name", descending: false };
const trendState = { windowDays: 30 };

function navigate(hash: string): void {
  if (location.hash === hash) render();
  else location.hash = hash; // hashchange listener re-renders
}

const main = el("main", { id: "page" });
const triageCount = el("span", { class: "nav-count", id: "triage-count" });

function navLink(hash: string, label: string, extra?: HTMLElement): HTMLElement {
  return el(
    "a",
    { href: hash, class: "nav-link", "data-route": hash },
    label,
    extra ?? null,
  );
}

document.body.append(
  el(
    "header",
    { class: "topbar" },
    el("h1", {}, "Tray inventory"),
    el(
      "nav",
      {},
      navLink("#/", "Chemicals"),
      navLink("#/triage", "Review", triageCount),
      navLink("#/register", "Register"),
    ),
  ),
  main,
);

function markActive(route: Route): void {
  // the trend page belongs to the Chemicals section
  const active = route.page === "triage" || route.page === "register" ? `#/${route.page}` : "#/";
  document.querySelectorAll<HTMLAnchorElement>(".nav-link").forEach((a) => {
    a.classList.toggle("active", a.dataset.route === active);
  });
}

async function updateTriageCount(): Promise<void> {
  try {
    const status = await api.status();
    triageCount.textContent = status.open_ambiguous > 0 ? String(status.open_ambiguous) : "";
  } catch {
    // nav badge is best-effort; the page body shows real errors
  }
}

async function render(): Promise<void> {
  const route = parseRoute(location.hash);
  markActive(route);
  const refresh = () => void render();
  switch (route.page) {
    case "chemicals":
      await renderChemicals(main, api, indexState, {
        onOpen: (id) => navigate(`#/trend/${encodeURIComponent(id)}`),
        onStateChange: refresh,
      });
      break;
    case "trend":
      await renderTrend(main, api, route.chemicalId, trendState, {
        onBack: () => navigate("#/"),
        onStateChange: refresh,
      });
      break;
    case "triage":
      await renderTriage(main, api, { onResolved: refresh });
      break;
    case "register":
      renderRegister(main, api, () => void updateTriageCount());
      break;
  }
  void updateTriageCount();
}

function userIsTyping(): boolean {
  const active = document.activeElement;
  return (
    active instanceof HTMLInputElement ||
    active instanceof HTMLTextAreaElement ||
    active instanceof HTMLSelectElement
  );
}

window.addEventListener("hashchange", () => void render());
void render();

setInterval(() => {
  if (!userIsTyping()) void render();
}, POLL_MS);
