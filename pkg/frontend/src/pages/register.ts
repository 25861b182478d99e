/**
 * Registration forms: enroll a chemical, then containers carrying its tag.
 * Tare/gross are the enrollment weighings; the trays take over from there.
 */

import { ApiError, type Api } from "../api";
import { el, clear } from "../dom";

function field(label: string, input: HTMLInputElement): HTMLElement {
  return el("label", { class: "form-field" }, el("span", {}, label), input);
}

function textInput(placeholder = ""): HTMLInputElement {
  return el("input", { type: "text", placeholder }) as HTMLInputElement;
}

function numberInput(): HTMLInputElement {
  return el("input", { type: "number", step: "any" }) as HTMLInputElement;
}

export function renderRegister(container: HTMLElement, api: Api, onDone: () => void): void {
  clear(container);

  // --- chemical ---
  const chemId = textInput("e.g. etoh");
  const chemName = textInput("e.g. Ethanol");
  const chemHazard = textInput("optional");
  const chemLead = numberInput();
  chemLead.value = "3";
  const chemStatus = el("p", { class: "form-status", role: "status" });

  const chemForm = el(
    "div",
    { class: "card" },
    el("h2", {}, "New chemical"),
    field("Chemical id", chemId),
    field("Name", chemName),
    field("Hazard class", chemHazard),
    field("Reorder lead time (days)", chemLead),
    chemStatus,
    el(
      "button",
      {
        class: "btn btn-primary",
        onclick: async () => {
          chemStatus.textContent = "";
          chemStatus.className = "form-status";
          try {
            await api.registerChemical({
              chemical_id: chemId.value.trim(),
              name: chemName.value.trim(),
              hazard_class: chemHazard.value.trim(),
              reorder_lead_time_days: Number(chemLead.value) || 3,
            });
          } catch (err) {
            chemStatus.textContent = err instanceof ApiError ? err.message : String(err);
            chemStatus.className = "form-status form-error";
            return;
          }
          chemStatus.textContent = `Registered ${chemId.value.trim()}.`;
          chemStatus.className = "form-status form-ok";
          onDone();
        },
      },
      "Register chemical",
    ),
  );

  // --- container ---
  const tagId = textInput("C:…");
  const ofChemical = textInput("chemical id");
  const tare = numberInput();
  const gross = numberInput();
  const contStatus = el("p", { class: "form-status", role: "status" });

  const contForm = el(
    "div",
    { class: "card" },
    el("h2", {}, "New container"),
    field("Tag id", tagId),
    field("Chemical", ofChemical),
    field("Tare (g)", tare),
    field("Initial gross (g)", gross),
    contStatus,
    el(
      "button",
      {
        class: "btn btn-primary",
        onclick: async () => {
          contStatus.textContent = "";
          contStatus.className = "form-status";
          try {
            await api.registerContainer({
              tag_id: tagId.value.trim(),
              chemical_id: ofChemical.value.trim(),
              tare_g: Number(tare.value),
              initial_gross_g: Number(gross.value),
            });
          } catch (err) {
            contStatus.textContent = err instanceof ApiError ? err.message : String(err);
            contStatus.className = "form-status form-error";
            return;
          }
          contStatus.textContent = `Registered ${tagId.value.trim()}.`;
          contStatus.className = "form-status form-ok";
          onDone();
        },
      },
      "Register container",
    ),
  );

  container.append(chemForm, contForm);
}
