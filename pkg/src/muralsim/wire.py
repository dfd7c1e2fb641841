"""Ground-station wire protocol: newline-delimited JSON records.

Every message is one line with exactly the fields ``type``, ``ns``,
``seq``, ``t`` (seconds, 6 decimals) and ``payload``.  The same schema
rides the executor TCP stream, the console websocket, the persistence
journal and the replay fixtures, so logs diff cleanly against live
traffic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

HELLO = "HELLO"
NAVFIX = "NAVFIX"
TELEMETRY = "TELEMETRY"
COMMAND = "COMMAND"
MISSION = "MISSION"
PROGRESS = "PROGRESS"
EVENT = "EVENT"
PREVIEW = "PREVIEW"

TYPES = (HELLO, NAVFIX, TELEMETRY, COMMAND, MISSION, PROGRESS, EVENT, PREVIEW)

COMMAND_VERBS = ("takeoff", "land", "pause", "resume", "goto", "draw", "reboot_fcu")

# required payload keys per message type
_REQUIRED = {
    HELLO: ("role",),
    NAVFIX: ("u", "v", "n", "yaw", "source", "quality"),
    TELEMETRY: ("fsm", "battery", "paint_g", "spray_s"),
    COMMAND: ("verb", "args"),
    MISSION: ("path_ids",),
    PROGRESS: ("record",),
    EVENT: ("name",),
    PREVIEW: ("paths",),
}

# which direction each type may travel (enforced by the station)
FROM_CONSOLE = frozenset({HELLO, COMMAND, MISSION})
FROM_EXECUTOR = frozenset({HELLO, TELEMETRY, PROGRESS, EVENT})


class WireError(ValueError):
    pass


@dataclass(frozen=True)
class WireMessage:
    type: str
    ns: str
    seq: int
    t: float
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.type not in TYPES:
            raise WireError(f"unknown message type {self.type!r}")
        if not isinstance(self.seq, int) or self.seq < 0:
            raise WireError("seq must be a non-negative integer")
        missing = [k for k in _REQUIRED[self.type] if k not in self.payload]
        if missing:
            raise WireError(f"{self.type} payload missing {missing}")
        if self.type == COMMAND and self.payload["verb"] not in COMMAND_VERBS:
            raise WireError(f"unknown command verb {self.payload['verb']!r}")


def encode(msg: WireMessage) -> str:
    """One-line JSON record; byte-stable for identical messages."""
    obj = {"type": msg.type, "ns": msg.ns, "seq": msg.seq,
           "t": round(float(msg.t), 6), "payload": msg.payload}
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def decode(line: str) -> WireMessage:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WireError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise WireError("record must be a JSON object")
    extra = set(obj) - {"type", "ns", "seq", "t", "payload"}
    if extra:
        raise WireError(f"unexpected fields {sorted(extra)}")
    try:
        return WireMessage(type=obj["type"], ns=obj["ns"], seq=int(obj["seq"]),
                           t=float(obj["t"]), payload=obj.get("payload", {}))
    except KeyError as exc:
        raise WireError(f"missing field {exc}") from exc


def navfix_payload(fix) -> dict:
    return {"u": round(float(fix.position[0]), 6),
            "v": round(float(fix.position[1]), 6),
            "n": round(float(fix.position[2]), 6),
            "yaw": round(float(fix.yaw), 6),
            "source": fix.source,
            "quality": round(float(fix.quality), 4)}
