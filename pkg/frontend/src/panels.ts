/**
 * Telemetry panel: one card per namespace showing FSM state, battery,
 * paint and spray time, with a staleness badge after 1 s of silence.
 */

import { isStale, type ConsoleState } from "./state.js";

export function renderTelemetryPanel(
  root: HTMLElement,
  state: ConsoleState,
  now: number,
  onSelect: (ns: string) => void,
): void {
  root.textContent = "";
  for (const [ns, d] of state.drones) {
    const card = document.createElement("div");
    card.className = "drone-card" + (state.activeDrone === ns ? " active" : "");
    card.onclick = () => onSelect(ns);

    const title = document.createElement("div");
    title.className = "drone-title";
    title.textContent = ns;
    if (isStale(d, now)) {
      const badge = document.createElement("span");
      badge.className = "stale-badge";
      badge.textContent = "STALE";
      title.appendChild(badge);
    }
    card.appendChild(title);

    const body = document.createElement("div");
    body.className = "drone-body";
    if (d.telemetry) {
      const tele = d.telemetry;
      body.innerHTML =
        `<div>state: <b>${tele.fsm}</b></div>` +
        `<div>battery: ${(tele.battery * 100).toFixed(0)} %</div>` +
        `<div>paint: ${tele.paint_g.toFixed(0)} g</div>` +
        `<div>spraying: ${tele.spray_s.toFixed(1)} s</div>`;
    } else {
      body.textContent = "no telemetry yet";
    }
    card.appendChild(body);
    root.appendChild(card);
  }
}

export function renderErrors(root: HTMLElement, state: ConsoleState): void {
  root.textContent = "";
  for (const err of state.errors.slice(-4)) {
    const line = document.createElement("div");
    line.className = "error-line";
    line.textContent = err;
    root.appendChild(line);
  }
}
