/**
 * Operator console entry point: wires the session, state, panels and the
 * mural canvas together. Connects to the ground station's WebSocket
 * endpoint (?ws=host:port, default localhost:8766).
 */

import { decode, type CommandVerb, type WireMessage } from "./protocol.js";
import { ConsoleSession, type SocketLike } from "./session.js";
import {
  applyMessage,
  initialState,
  tickState,
} from "./state.js";
import { fitTransform, renderMural, screenToWall } from "./mural.js";
import { hitTest, toggle } from "./selector.js";
import { renderErrors, renderTelemetryPanel } from "./panels.js";

const params = new URLSearchParams(location.search);
const endpoint = params.get("ws") ?? `${location.hostname || "localhost"}:8766`;
const url = `ws://${endpoint}/`;

const state = initialState();
const nowS = () => performance.now() / 1000;

const session = new ConsoleSession({
  url,
  namespace: "console-" + Math.random().toString(36).slice(2, 7),
  // the runtime surface matches SocketLike; TS models the browser event
  // types more strictly than the subset the session uses
  connect: (u) => new WebSocket(u) as unknown as SocketLike,
  now: nowS,
  onMessage: (raw) => {
    let msg: WireMessage;
    try {
      msg = decode(JSON.stringify(raw));
    } catch {
      return;
    }
    applyMessage(state, msg, nowS());
  },
  onStatus: (connected) => {
    state.connected = connected;
    const el = document.getElementById("conn");
    if (el) {
      el.textContent = connected ? "connected" : "reconnecting...";
      el.className = connected ? "ok" : "bad";
    }
  },
});
session.open();

const canvas = document.getElementById("mural") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const telemetryRoot = document.getElementById("telemetry")!;
const errorsRoot = document.getElementById("errors")!;

canvas.addEventListener("click", (ev) => {
  if (!state.preview) return;
  const rect = canvas.getBoundingClientRect();
  const t = fitTransform(state.preview.wall, canvas.width, canvas.height);
  const p = screenToWall(t, ev.clientX - rect.left, ev.clientY - rect.top);
  const id = hitTest(state.preview.paths, p);
  if (id !== null) {
    toggle(state.selectedPaths, id);
    state.conflictIds = [];
  }
});

function bindButton(id: string, fn: () => void): void {
  document.getElementById(id)?.addEventListener("click", () => {
    try {
      fn();
    } catch (err) {
      state.errors.push(String(err));
    }
  });
}

function activeNs(): string {
  if (!state.activeDrone) throw new Error("no drone selected");
  return state.activeDrone;
}

function sendCommand(verb: CommandVerb, args: number[] = []): void {
  const ns = activeNs();
  session.command(ns, verb, args);
  state.pending.push({ ns, verb, sentAt: nowS(), acked: false, timedOut: false });
}

for (const verb of ["takeoff", "land", "pause", "resume", "draw", "reboot_fcu"] as const) {
  bindButton(`btn-${verb}`, () => sendCommand(verb));
}
bindButton("btn-goto", () => {
  if (!state.preview) throw new Error("no plan loaded");
  const u = Number((document.getElementById("goto-u") as HTMLInputElement).value);
  const v = Number((document.getElementById("goto-v") as HTMLInputElement).value);
  const n = Number((document.getElementById("goto-n") as HTMLInputElement).value);
  const ns = activeNs();
  session.goto(ns, { u, v, n }, state.preview.wall);
  state.pending.push({ ns, verb: "goto", sentAt: nowS(), acked: false, timedOut: false });
});
bindButton("btn-assign", () => {
  session.assignPaths(activeNs(), [...state.selectedPaths]);
  state.selectedPaths.clear();
});
bindButton("btn-select-all", () => {
  if (!state.preview) return;
  for (const p of state.preview.paths) state.selectedPaths.add(p.id);
});
bindButton("btn-overlay", () => {
  state.showOverlay = !state.showOverlay;
});

function frame(): void {
  tickState(state, nowS());
  if (state.preview) {
    const t = fitTransform(state.preview.wall, canvas.width, canvas.height);
    renderMural(ctx, state, t, null);
  }
  renderTelemetryPanel(telemetryRoot, state, nowS(), (ns) => {
    state.activeDrone = ns;
  });
  renderErrors(errorsRoot, state);
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
