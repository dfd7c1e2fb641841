/**
 * Console session: socket lifecycle, outbound sequence numbering, the
 * outbound message log (replayable against `muralsim replay`), and
 * reconnect with backoff.
 *
 * The socket is injected as a minimal interface so tests (and the node
 * integration driver) can supply `ws` or a fake; the browser passes a
 * WebSocket.
 */

import { encode, type CommandVerb, type WireMessage } from "./protocol.js";
import { gotoValid } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage?: ((ev: { data: unknown }) => void) | null;
  onopen?: ((ev?: unknown) => void) | null;
  onclose?: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  url: string;
  namespace: string; // this console's own namespace
  connect: SocketFactory;
  now?: () => number; // seconds, monotonic-ish
  onMessage?: (msg: WireMessage) => void;
  onStatus?: (connected: boolean) => void;
  reconnect?: boolean;
}

export class ConsoleSession {
  readonly outboundLog: string[] = [];
  private seqByType = new Map<string, number>();
  private socket: SocketLike | null = null;
  private closed = false;
  private backoffMs = 250;
  private readonly opts: SessionOptions;

  constructor(opts: SessionOptions) {
    this.opts = opts;
  }

  private now(): number {
    return this.opts.now ? this.opts.now() : Date.now() / 1000;
  }

  private nextSeq(type: string): number {
    const seq = (this.seqByType.get(type) ?? -1) + 1;
    this.seqByType.set(type, seq);
    return seq;
  }

  open(): void {
    if (this.closed) return;
    const sock = this.opts.connect(this.opts.url);
    this.socket = sock;
    sock.onopen = () => {
      this.backoffMs = 250;
      this.sendRaw({
        type: "HELLO",
        ns: this.opts.namespace,
        seq: this.nextSeq("HELLO"),
        t: this.now(),
        payload: { role: "console" },
      });
      this.opts.onStatus?.(true);
    };
    sock.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      for (const line of text.split("\n")) {
        if (!line.trim()) continue;
        try {
          // decode lazily-imported to keep this module socket-focused
          const msg = JSON.parse(line) as WireMessage;
          this.opts.onMessage?.(msg);
        } catch {
          /* malformed inbound lines are dropped, connection kept */
        }
      }
    };
    sock.onclose = () => {
      this.opts.onStatus?.(false);
      this.socket = null;
      if (!this.closed && this.opts.reconnect !== false) {
        setTimeout(() => this.open(), this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, 5000);
      }
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }

  /** Every user action maps to exactly one logged wire message. */
  private sendRaw(msg: WireMessage): void {
    const line = encode(msg); // enforces console direction rules
    this.outboundLog.push(line);
    if (!this.socket) throw new Error("not connected");
    this.socket.send(line);
  }

  command(ns: string, verb: CommandVerb, args: number[] = []): void {
    this.sendRaw({
      type: "COMMAND",
      ns,
      seq: this.nextSeq(`COMMAND:${ns}`),
      t: this.now(),
      payload: { verb, args },
    });
  }

  goto(ns: string, target: { u: number; v: number; n: number }, wall: [number, number]): void {
    if (!gotoValid(target, wall)) {
      throw new Error(
        `goto target (${target.u}, ${target.v}, ${target.n}) outside the wall envelope`,
      );
    }
    this.command(ns, "goto", [target.u, target.v, target.n]);
  }

  assignPaths(ns: string, pathIds: number[]): void {
    this.sendRaw({
      type: "MISSION",
      ns,
      seq: this.nextSeq(`MISSION:${ns}`),
      t: this.now(),
      payload: { path_ids: [...pathIds].sort((a, b) => a - b) },
    });
  }

  /** Outbound log as a journal file body for `muralsim replay`. */
  journalText(): string {
    return ["muraljournal 1", ...this.outboundLog].join("\n") + "\n";
  }
}
