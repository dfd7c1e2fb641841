/**
 * Wire protocol records shared with the ground station: one JSON object
 * per message with exactly the fields type, ns, seq, t, payload.
 *
 * The console is command-and-display only: it may originate HELLO,
 * COMMAND and MISSION, never NAVFIX or TELEMETRY. Direction violations
 * throw before anything reaches the socket.
 */

export type MessageType =
  | "HELLO"
  | "NAVFIX"
  | "TELEMETRY"
  | "COMMAND"
  | "MISSION"
  | "PROGRESS"
  | "EVENT"
  | "PREVIEW";

export const COMMAND_VERBS = [
  "takeoff",
  "land",
  "pause",
  "resume",
  "goto",
  "draw",
  "reboot_fcu",
] as const;
export type CommandVerb = (typeof COMMAND_VERBS)[number];

/** Types a console is allowed to send. */
export const CONSOLE_OUTBOUND: ReadonlySet<MessageType> = new Set([
  "HELLO",
  "COMMAND",
  "MISSION",
]);

export interface WireMessage {
  type: MessageType;
  ns: string;
  seq: number;
  t: number;
  payload: Record<string, unknown>;
}

export interface NavFixPayload {
  u: number;
  v: number;
  n: number;
  yaw: number;
  source: "primary_link" | "backup_link";
  quality: number;
}

export interface TelemetryPayload {
  fsm: string;
  battery: number;
  paint_g: number;
  spray_s: number;
}

export interface PreviewPath {
  id: number;
  kind: "outline" | "infill";
  points: [number, number][];
}

export interface PreviewPayload {
  paths: PreviewPath[];
  wall: [number, number];
  assignments: Record<string, number[]>;
}

const TYPES: ReadonlySet<string> = new Set([
  "HELLO",
  "NAVFIX",
  "TELEMETRY",
  "COMMAND",
  "MISSION",
  "PROGRESS",
  "EVENT",
  "PREVIEW",
]);

const REQUIRED: Record<MessageType, string[]> = {
  HELLO: ["role"],
  NAVFIX: ["u", "v", "n", "yaw", "source", "quality"],
  TELEMETRY: ["fsm", "battery", "paint_g", "spray_s"],
  COMMAND: ["verb", "args"],
  MISSION: ["path_ids"],
  PROGRESS: ["record"],
  EVENT: ["name"],
  PREVIEW: ["paths"],
};

export class WireError extends Error {}

export function validate(msg: WireMessage): WireMessage {
  if (!TYPES.has(msg.type)) {
    throw new WireError(`unknown message type ${msg.type}`);
  }
  if (!Number.isInteger(msg.seq) || msg.seq < 0) {
    throw new WireError("seq must be a non-negative integer");
  }
  for (const key of REQUIRED[msg.type]) {
    if (!(key in msg.payload)) {
      throw new WireError(`${msg.type} payload missing ${key}`);
    }
  }
  if (msg.type === "COMMAND" && !COMMAND_VERBS.includes(msg.payload.verb as CommandVerb)) {
    throw new WireError(`unknown command verb ${String(msg.payload.verb)}`);
  }
  return msg;
}

/** Byte-stable single-line encoding (sorted keys, compact separators). */
export function encode(msg: WireMessage): string {
  validate(msg);
  if (!CONSOLE_OUTBOUND.has(msg.type)) {
    throw new WireError(`console may not send ${msg.type} (direction violation)`);
  }
  const obj = {
    ns: msg.ns,
    payload: msg.payload,
    seq: msg.seq,
    t: Math.round(msg.t * 1e6) / 1e6,
    type: msg.type,
  };
  return stableStringify(obj);
}

export function decode(line: string): WireMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch (err) {
    throw new WireError(`not valid JSON: ${String(err)}`);
  }
  if (typeof obj !== "object" || obj === null) {
    throw new WireError("record must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  for (const key of Object.keys(rec)) {
    if (!["type", "ns", "seq", "t", "payload"].includes(key)) {
      throw new WireError(`unexpected field ${key}`);
    }
  }
  return validate({
    type: rec.type as MessageType,
    ns: String(rec.ns),
    seq: Number(rec.seq),
    t: Number(rec.t),
    payload: (rec.payload ?? {}) as Record<string, unknown>,
  });
}

function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => `${JSON.stringify(k)}:${stableStringify(v)}`);
  return `{${entries.join(",")}}`;
}
