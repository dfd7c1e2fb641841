/**
 * Console state: a plain snapshot updated by inbound messages and a
 * monotonic clock. Rendering reads it once per frame; nothing here
 * touches the DOM or the socket.
 */

import type {
  NavFixPayload,
  PreviewPayload,
  TelemetryPayload,
  WireMessage,
} from "./protocol.js";

export const STALE_AFTER_S = 1.0; // telemetry silence before the stale badge
export const ACK_TIMEOUT_S = 2.0; // command unacknowledged flag
export const TRAIL_LENGTH = 300;

export interface DroneStatus {
  telemetry: TelemetryPayload | null;
  telemetryAt: number; // local monotonic seconds
  lastFix: NavFixPayload | null;
  trail: [number, number][];
}

export interface PendingCommand {
  ns: string;
  verb: string;
  sentAt: number;
  acked: boolean;
  timedOut: boolean;
}

export interface ConsoleState {
  connected: boolean;
  preview: PreviewPayload | null;
  drones: Map<string, DroneStatus>;
  selectedPaths: Set<number>; // pending (unconfirmed) selection
  activeDrone: string | null;
  pending: PendingCommand[];
  errors: string[];
  conflictIds: number[]; // ids named by the last server rejection
  showOverlay: boolean;
}

export function initialState(): ConsoleState {
  return {
    connected: false,
    preview: null,
    drones: new Map(),
    selectedPaths: new Set(),
    activeDrone: null,
    pending: [],
    errors: [],
    conflictIds: [],
    showOverlay: true,
  };
}

function drone(state: ConsoleState, ns: string): DroneStatus {
  let d = state.drones.get(ns);
  if (!d) {
    d = { telemetry: null, telemetryAt: -Infinity, lastFix: null, trail: [] };
    state.drones.set(ns, d);
  }
  return d;
}

/** Apply one inbound message at local time `now` (seconds). */
export function applyMessage(state: ConsoleState, msg: WireMessage, now: number): void {
  switch (msg.type) {
    case "PREVIEW": {
      state.preview = msg.payload as unknown as PreviewPayload;
      for (const ns of Object.keys(state.preview.assignments)) {
        drone(state, ns);
        if (state.activeDrone === null) state.activeDrone = ns;
      }
      break;
    }
    case "TELEMETRY": {
      const d = drone(state, msg.ns);
      d.telemetry = msg.payload as unknown as TelemetryPayload;
      d.telemetryAt = now;
      if (state.activeDrone === null) state.activeDrone = msg.ns;
      ackPending(state, msg.ns);
      break;
    }
    case "NAVFIX": {
      const d = drone(state, msg.ns);
      const fix = msg.payload as unknown as NavFixPayload;
      d.lastFix = fix;
      d.trail.push([fix.u, fix.v]);
      if (d.trail.length > TRAIL_LENGTH) d.trail.shift();
      break;
    }
    case "EVENT": {
      const name = String(msg.payload.name ?? "");
      const detail = String(msg.payload.detail ?? "");
      if (name === "command_relayed") {
        ackPending(state, msg.ns);
      } else if (name === "error" || name === "refused") {
        state.errors.push(detail);
        state.conflictIds = parseConflictIds(detail);
      }
      break;
    }
    default:
      break; // PROGRESS etc. are not console concerns
  }
}

function ackPending(state: ConsoleState, ns: string): void {
  for (const p of state.pending) {
    if (p.ns === ns && !p.acked && !p.timedOut) p.acked = true;
  }
}

/** ids mentioned in an assignment-conflict error like "... twice: [3, 5]" */
export function parseConflictIds(detail: string): number[] {
  const match = detail.match(/\[([0-9,\s]+)\]/);
  if (!match) return [];
  return match[1]
    .split(",")
    .map((s) => Number(s.trim()))
    .filter((n) => Number.isInteger(n));
}

/** Periodic upkeep: staleness and ack timeouts. */
export function tickState(state: ConsoleState, now: number): void {
  for (const p of state.pending) {
    if (!p.acked && !p.timedOut && now - p.sentAt > ACK_TIMEOUT_S) {
      p.timedOut = true;
      state.errors.push(`${p.verb} for ${p.ns} unacknowledged`);
    }
  }
  while (state.pending.length > 50) state.pending.shift();
}

export function isStale(d: DroneStatus, now: number): boolean {
  return now - d.telemetryAt > STALE_AFTER_S;
}

/** goto targets must stay near the wall: extent plus a safety margin */
export function gotoValid(
  target: { u: number; v: number; n: number },
  wall: [number, number],
  margin = 0.5,
): boolean {
  return (
    target.u >= -margin &&
    target.u <= wall[0] + margin &&
    target.v >= 0 &&
    target.v <= wall[1] + margin &&
    target.n > 0 &&
    target.n <= 2.0
  );
}
