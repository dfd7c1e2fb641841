"""Ground-station service: session registry, message routing, mission
assignment and crash-safe persistence.

``StationCore`` is the pure, deterministic heart: it validates and
applies wire messages, journals the state-mutating ones, and can rebuild
itself from the journal alone.  ``StationServer`` wraps it in asyncio
listeners (newline-JSON TCP for executors, WebSocket for consoles) and
drives a live simulation with real-time pacing.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from muralsim import wire, ws
from muralsim.compiler import MissionPlan
from muralsim.fsm import load_progress
from muralsim.sim.runner import Simulation
from muralsim.wire import WireMessage

logger = logging.getLogger(__name__)

JOURNAL_MAGIC = "muraljournal 1"
SNAPSHOT_MAGIC = "muralsnap"
SNAPSHOT_VERSION = 1

CONSOLES = "@consoles"  # broadcast address for routing outputs


class StationError(RuntimeError):
    pass


class NamespaceCollision(StationError):
    pass


def assign_paths(plan: MissionPlan, selections: dict[str, list[int]]
                 ) -> dict[str, MissionPlan]:
    """Per-drone plan slices from operator selections.

    Selections must not assign any path id twice; each slice keeps the
    plan's global ordering, hence its band monotonicity.
    """
    seen: dict[int, str] = {}
    conflicts: list[int] = []
    for ns, ids in selections.items():
        for pid in ids:
            if pid in seen and seen[pid] != ns:
                conflicts.append(pid)
            seen[pid] = ns
    if conflicts:
        raise StationError(f"path ids assigned twice: {sorted(set(conflicts))}")
    return {ns: plan.subset(ids) for ns, ids in selections.items()}


@dataclass
class DroneSession:
    namespace: str
    role: str
    last_telemetry: dict | None = None
    telemetry_t: float = -1.0
    assigned_ids: list[int] = field(default_factory=list)


class StationCore:
    """Deterministic station state machine with journal persistence."""

    def __init__(self, plan: MissionPlan, data_dir: str | Path | None = None,
                 known_namespaces=()):
        self.plan = plan
        self.data_dir = Path(data_dir) if data_dir else None
        self.known_namespaces = set(known_namespaces)
        self.sessions: dict[str, DroneSession] = {}
        self.progress: dict[str, str] = {}     # ns -> latest progress record
        self.assignments: dict[str, list[int]] = {}
        self._seq_out: dict[tuple[str, str], int] = {}
        self._seq_in: dict[tuple[str, str], int] = {}
        self._journal_fh = None
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._replay_journal_file()
            self._journal_fh = open(self.journal_path, "a", encoding="utf-8")
            if self.journal_path.stat().st_size == 0:
                self._journal_fh.write(JOURNAL_MAGIC + "\n")
                self._journal_fh.flush()

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    @property
    def journal_path(self) -> Path:
        return self.data_dir / "journal.jsonl"

    @property
    def snapshot_path(self) -> Path:
        return self.data_dir / "state.json"

    def _replay_journal_file(self) -> None:
        if not self.journal_path.exists():
            self.journal_path.touch()
            return
        lines = self.journal_path.read_text().splitlines()
        if lines and lines[0] != JOURNAL_MAGIC:
            raise StationError("journal has an unknown header")
        self.replay(lines[1:])

    def replay(self, lines) -> None:
        """Rebuild state by re-applying journaled messages (no re-journal,
        no outputs)."""
        for line in lines:
            if not line.strip():
                continue
            msg = wire.decode(line)
            self._apply_state(msg)

    def _journal(self, msg: WireMessage) -> None:
        if self._journal_fh is not None:
            self._journal_fh.write(wire.encode(msg) + "\n")
            self._journal_fh.flush()
            os.fsync(self._journal_fh.fileno())

    def snapshot_bytes(self) -> bytes:
        state = {
            "magic": SNAPSHOT_MAGIC,
            "version": SNAPSHOT_VERSION,
            "assignments": {ns: list(ids) for ns, ids in sorted(self.assignments.items())},
            "progress": dict(sorted(self.progress.items())),
        }
        return (json.dumps(state, sort_keys=True, indent=1) + "\n").encode()

    def write_snapshot(self) -> None:
        if self.data_dir is None:
            return
        tmp = self.snapshot_path.with_suffix(".tmp")
        tmp.write_bytes(self.snapshot_bytes())
        os.replace(tmp, self.snapshot_path)

    def close(self) -> None:
        self.write_snapshot()
        if self._journal_fh is not None:
            self._journal_fh.close()
            self._journal_fh = None

    # ------------------------------------------------------------------
    # sessions
    # ------------------------------------------------------------------

    def register(self, role: str, ns: str) -> list[tuple[str, WireMessage]]:
        if ns in self.sessions:
            raise NamespaceCollision(f"namespace {ns!r} already connected")
        self.sessions[ns] = DroneSession(namespace=ns, role=role)
        logger.info("session %s registered as %s", ns, role)
        if role == "console":
            return [(ns, self._preview_message())]
        return []

    def unregister(self, ns: str) -> None:
        self.sessions.pop(ns, None)

    def _next_seq(self, ns: str, mtype: str) -> int:
        key = (ns, mtype)
        self._seq_out[key] = self._seq_out.get(key, -1) + 1
        return self._seq_out[key]

    def make_message(self, mtype: str, ns: str, t: float, payload: dict) -> WireMessage:
        return WireMessage(type=mtype, ns=ns, seq=self._next_seq(ns, mtype),
                           t=t, payload=payload)

    def _preview_message(self, t: float = 0.0) -> WireMessage:
        paths = []
        for p in self.plan.paths:
            pts = [[round(float(u), 3), round(float(v), 3)] for u, v in p.drawing_points()]
            paths.append({"id": p.id, "kind": p.kind, "points": pts})
        payload = {"paths": paths,
                   "wall": [self.plan.wall_extent[0], self.plan.wall_extent[1]],
                   "assignments": {ns: list(ids) for ns, ids in self.assignments.items()}}
        return self.make_message(wire.PREVIEW, "*", t, payload)

    # ------------------------------------------------------------------
    # message handling
    # ------------------------------------------------------------------

    def _check_seq(self, msg: WireMessage) -> None:
        key = (msg.ns, msg.type)
        last = self._seq_in.get(key, -1)
        if msg.seq <= last:
            raise StationError(
                f"sequence regression on {key}: {msg.seq} after {last}")
        self._seq_in[key] = msg.seq

    def _apply_state(self, msg: WireMessage) -> None:
        """State mutations shared by live handling and journal replay."""
        if msg.type == wire.MISSION:
            raw = msg.payload["path_ids"]
            selections = {msg.ns: [int(x) for x in raw]} if isinstance(raw, list) \
                else {ns: [int(x) for x in ids] for ns, ids in raw.items()}
            merged = {**self.assignments, **selections}
            assign_paths(self.plan, merged)  # raises on overlap
            self.assignments.update(selections)
        elif msg.type == wire.PROGRESS:
            self.progress[msg.ns] = msg.payload["record"]

    def handle(self, msg: WireMessage, sender_role: str,
               ) -> list[tuple[str, WireMessage]]:
        """Apply one inbound message; returns routed outputs as
        (destination, message): a namespace or the console broadcast."""
        allowed = wire.FROM_CONSOLE if sender_role == "console" else wire.FROM_EXECUTOR
        if msg.type not in allowed:
            raise StationError(
                f"{sender_role} may not send {msg.type} (direction violation)")
        self._check_seq(msg)
        out: list[tuple[str, WireMessage]] = []
        if msg.type == wire.COMMAND:
            target = msg.ns
            if target not in self.sessions and target not in self.assignments \
                    and target not in self.known_namespaces:
                raise StationError(f"command for unknown namespace {target!r}")
            out.append((target, msg))
            out.append((CONSOLES, self.make_message(
                wire.EVENT, target, msg.t,
                {"name": "command_relayed", "detail": msg.payload["verb"]})))
        elif msg.type == wire.MISSION:
            self._apply_state(msg)
            self._journal(msg)
            self.write_snapshot()
            out.append((msg.ns, msg))
            out.append((CONSOLES, self._preview_message(msg.t)))
        elif msg.type == wire.PROGRESS:
            self._apply_state(msg)
            self._journal(msg)
            self.write_snapshot()
        elif msg.type == wire.TELEMETRY:
            if msg.ns in self.sessions:
                self.sessions[msg.ns].last_telemetry = msg.payload
                self.sessions[msg.ns].telemetry_t = msg.t
            out.append((CONSOLES, msg))
        elif msg.type == wire.EVENT:
            out.append((CONSOLES, msg))
        return out


# ---------------------------------------------------------------------------
# asyncio server
# ---------------------------------------------------------------------------

class StationServer:
    """Live service: TCP (executors / tools) + WebSocket (consoles),
    bound to an in-process simulation advanced in paced real time."""

    def __init__(self, sim: Simulation, core: StationCore,
                 tcp_port: int, ws_port: int | None = None, rate: float = 1.0):
        self.sim = sim
        self.core = core
        self.tcp_port = tcp_port
        self.ws_port = ws_port if ws_port is not None else tcp_port + 1
        self.rate = rate
        self._writers: dict[str, tuple[str, object]] = {}  # ns -> (kind, writer)
        self._send_queue: asyncio.Queue = asyncio.Queue()
        self._stop = asyncio.Event()
        core.known_namespaces.update(sim.executors)
        self._resume_from_progress()
        sim.on_navfix = self._sim_navfix
        sim.on_telemetry = self._sim_telemetry

    # -- wiring between the in-process sim and the wire protocol --------

    def _resume_from_progress(self) -> None:
        for ns, record in self.core.progress.items():
            ex = self.sim.executors.get(ns)
            if ex is None:
                continue
            try:
                ex.progress = load_progress(record, ex.plan)
                logger.info("resumed %s from persisted progress", ns)
            except Exception as exc:
                logger.warning("stored progress for %s not applicable: %s", ns, exc)

    def _sim_navfix(self, ns: str, fix) -> None:
        msg = self.core.make_message(wire.NAVFIX, ns, fix.timestamp,
                                     wire.navfix_payload(fix))
        self._send_queue.put_nowait((ns, msg))
        self._send_queue.put_nowait((CONSOLES, msg))

    def _sim_telemetry(self, ns: str, payload: dict) -> None:
        msg = self.core.make_message(wire.TELEMETRY, ns, self.sim._t_last, payload)
        if ns in self.core.sessions:
            self.core.sessions[ns].last_telemetry = payload
        self._send_queue.put_nowait((CONSOLES, msg))
        # the in-process executor also persists progress through the core
        rec = self.sim.progress_records.pop(ns, None)
        if rec is not None:
            pmsg = self.core.make_message(wire.PROGRESS, ns, self.sim._t_last,
                                          {"record": rec})
            self.core._apply_state(pmsg)
            self.core._journal(pmsg)
            self.core.write_snapshot()

    def _deliver_inbound(self, msg: WireMessage, role: str) -> None:
        outputs = self.core.handle(msg, role)
        for dest, out in outputs:
            if dest == msg.ns and out is msg and msg.type == wire.COMMAND \
                    and dest in self.sim.executors:
                args = out.payload.get("args") or []
                self.sim.inject_command(dest, out.payload["verb"], args)
                continue
            self._send_queue.put_nowait((dest, out))

    # -- transport plumbing ---------------------------------------------

    async def _fanout_task(self) -> None:
        # keeps flushing after stop until the queue is empty, so consoles
        # see the end of the mission rather than a truncated stream
        while not (self._stop.is_set() and self._send_queue.empty()):
            try:
                dest, msg = await asyncio.wait_for(self._send_queue.get(), timeout=0.2)
            except asyncio.TimeoutError:
                continue
            line = wire.encode(msg)
            targets = []
            if dest == CONSOLES:
                targets = [(ns, k, w) for ns, (k, w) in self._writers.items()
                           if self.core.sessions.get(ns) and
                           self.core.sessions[ns].role == "console"]
            elif dest in self._writers:
                targets = [(dest, *self._writers[dest])]
            for ns, kind, writer in targets:
                try:
                    if kind == "tcp":
                        writer.write((line + "\n").encode())
                        await writer.drain()
                    else:
                        await ws.send_text(writer, line)
                except (ConnectionError, RuntimeError):
                    self._drop(ns)

    def _drop(self, ns: str) -> None:
        self._writers.pop(ns, None)
        self.core.unregister(ns)

    async def _serve_client(self, kind: str, reader, writer, read_line) -> None:
        ns = None
        registered = False
        try:
            first = await read_line()
            if first is None:
                return
            hello = wire.decode(first)
            if hello.type != wire.HELLO:
                raise StationError("first message must be HELLO")
            role = hello.payload["role"]
            ns = hello.ns
            try:
                outputs = self.core.register(role, ns)
                registered = True
            except NamespaceCollision as exc:
                refusal = wire.encode(WireMessage(
                    type=wire.EVENT, ns=ns, seq=0, t=self.sim._t_last,
                    payload={"name": "refused", "detail": str(exc)}))
                if kind == "tcp":
                    writer.write((refusal + "\n").encode())
                    await writer.drain()
                else:
                    await ws.send_text(writer, refusal)
                return
            self._writers[ns] = (kind, writer)
            for dest, out in outputs:
                self._send_queue.put_nowait((dest, out))
            while not self._stop.is_set():
                line = await read_line()
                if line is None:
                    break
                if not line.strip():
                    continue
                try:
                    msg = wire.decode(line)
                    self._deliver_inbound(msg, role)
                except (wire.WireError, StationError) as exc:
                    err = self.core.make_message(
                        wire.EVENT, ns, self.sim._t_last,
                        {"name": "error", "detail": str(exc)})
                    self._send_queue.put_nowait((ns, err))
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            # only tear down a session this connection actually owns; a
            # refused duplicate must not evict the legitimate client
            if registered:
                self._drop(ns)
            try:
                writer.close()
            except Exception:
                pass

    async def _handle_tcp(self, reader, writer) -> None:
        async def read_line():
            data = await reader.readline()
            return None if not data else data.decode().rstrip("\n")
        await self._serve_client("tcp", reader, writer, read_line)

    async def _handle_ws(self, reader, writer) -> None:
        try:
            await ws.server_handshake(reader, writer)
        except ws.WsError:
            writer.close()
            return

        async def read_line():
            return await ws.read_text(reader, writer)
        await self._serve_client("ws", reader, writer, read_line)

    async def _sim_task(self) -> None:
        from muralsim.fsm import FsmState

        dt = self.sim.dt
        start = time.perf_counter()
        k = 0
        total = int(round(self.sim.sc.duration_s * self.sim.sc.tick_hz))
        activity = False
        while not self._stop.is_set() and k < total:
            target = start + (k * dt) / self.rate
            delay = target - time.perf_counter()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                await asyncio.sleep(0)
            self.sim.tick(k)
            k += 1
            activity = activity or any(ex.state != FsmState.IDLE
                                       for ex in self.sim.executors.values())
            # a parked drone is *not* the end of the session: the operator
            # may be preparing, or resuming after a manual landing; exit
            # only once every executor's mission is complete (or faulted)
            mission_complete = all(
                ex.progress.next_pending(ex.plan) is None
                or ex.state == FsmState.FAULT
                for ex in self.sim.executors.values())
            if activity and mission_complete and self.sim.settled() and k * dt > 1.0:
                break
        self._stop.set()

    async def run(self) -> None:
        tcp_server = await asyncio.start_server(self._handle_tcp, "127.0.0.1",
                                                self.tcp_port)
        ws_server = await asyncio.start_server(self._handle_ws, "127.0.0.1",
                                               self.ws_port)
        fanout = asyncio.create_task(self._fanout_task())
        simtask = asyncio.create_task(self._sim_task())
        logger.info("station listening: tcp=%d ws=%d", self.tcp_port, self.ws_port)
        try:
            await self._stop.wait()
        finally:
            simtask.cancel()
            try:
                await asyncio.wait_for(fanout, timeout=5.0)
            except (asyncio.TimeoutError, asyncio.CancelledError):
                fanout.cancel()
            tcp_server.close()
            ws_server.close()
            await tcp_server.wait_closed()
            await ws_server.wait_closed()
            self.core.close()

    def stop(self) -> None:
        self._stop.set()
