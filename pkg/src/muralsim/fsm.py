"""Per-drone mission state machine and persistent progress records.

The state machine is a pure transition function over (state, event,
guards) so its safety properties can be model-checked by exhaustive
enumeration.  Progress is a per-path completed-arc ledger serialized to
a line-oriented text record tied to the plan by hash.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

from muralsim.compiler import MissionPlan, plan_hash

logger = logging.getLogger(__name__)


class FsmState(str, enum.Enum):
    IDLE = "Idle"
    TAKEOFF = "Takeoff"
    NAVIGATE = "NavigateToPath"
    LEAD_IN = "LeadIn"
    DRAWING = "Drawing"
    LEAD_OUT = "LeadOut"
    LANDING = "Landing"
    LANDED = "Landed"
    BATTERY_SWAP = "BatterySwap"
    PAUSED = "Paused"
    FAULT = "Fault"


AIRBORNE = frozenset({
    FsmState.TAKEOFF, FsmState.NAVIGATE, FsmState.LEAD_IN,
    FsmState.DRAWING, FsmState.LEAD_OUT, FsmState.LANDING, FsmState.PAUSED,
})
# the only states in which the spray command may ever be asserted
SPRAY_STATES = frozenset({FsmState.LEAD_IN, FsmState.DRAWING, FsmState.LEAD_OUT})
ON_PATH = frozenset({FsmState.LEAD_IN, FsmState.DRAWING, FsmState.LEAD_OUT})

EVENTS = (
    "fix_ok", "fix_timeout", "path_done", "battery_low", "paint_empty",
    "cmd_takeoff", "cmd_land", "cmd_pause", "cmd_resume", "cmd_goto",
    "swap_done", "swap_timeout",
)

SWAP_TIME_LIMIT_S = 10.0   # supercapacitor hold-up window
STROKE_GRACE_S = 2.0       # finish the stroke when this close to its end


@dataclass(frozen=True)
class FsmContext:
    """Guard inputs for the transition function."""

    phase_complete: bool = False        # current motion goal reached at this fix
    plan_exhausted: bool = False        # no pending paths remain
    remaining_stroke_s: float | None = None  # est. seconds to finish the stroke
    paused_from: FsmState | None = None


# actions: "save_progress", "hold", "abort_stroke", "finish_then_land", "emit_path_done"


def fsm_step(state: FsmState, event: str, ctx: FsmContext) -> tuple[FsmState, list[str]]:
    """One transition.  Unknown (state, event) pairs are logged and leave
    the state unchanged; every actual transition carries save_progress."""
    if event not in EVENTS:
        raise ValueError(f"unknown event {event!r}")

    def go(new_state: FsmState, *actions: str) -> tuple[FsmState, list[str]]:
        acts = list(actions)
        if new_state != state:
            acts.append("save_progress")
        return new_state, acts

    def ignored() -> tuple[FsmState, list[str]]:
        logger.debug("event %s ignored in state %s", event, state.value)
        return state, []

    if event == "fix_timeout":
        return (state, ["hold"]) if state in AIRBORNE else ignored()

    if event == "cmd_land":
        if state in AIRBORNE and state != FsmState.LANDING:
            if state in ON_PATH:
                return go(FsmState.LANDING, "abort_stroke")
            return go(FsmState.LANDING)
        return ignored()

    if event == "cmd_pause":
        if state in AIRBORNE - {FsmState.LANDING, FsmState.PAUSED}:
            return go(FsmState.PAUSED, "hold")
        return ignored()

    if event == "cmd_goto":
        # goto = fly to the commanded point and hold there
        if state in AIRBORNE - {FsmState.LANDING}:
            return go(FsmState.PAUSED)
        return ignored()

    if event == "cmd_resume":
        if state == FsmState.PAUSED:
            came_from = ctx.paused_from
            if came_from in ON_PATH or came_from is None:
                # a stroke interrupted mid-air restarts with a fresh lead-in
                return go(FsmState.NAVIGATE)
            if came_from in (FsmState.TAKEOFF, FsmState.NAVIGATE):
                return go(came_from)
            return go(FsmState.NAVIGATE)
        return ignored()

    if event in ("battery_low", "paint_empty"):
        if state == FsmState.DRAWING and ctx.remaining_stroke_s is not None \
                and ctx.remaining_stroke_s < STROKE_GRACE_S:
            return state, ["finish_then_land"]
        if state in AIRBORNE and state != FsmState.LANDING:
            if state in ON_PATH:
                return go(FsmState.LANDING, "abort_stroke")
            return go(FsmState.LANDING)
        if state == FsmState.LANDED and event == "battery_low":
            return go(FsmState.BATTERY_SWAP)
        return ignored()

    if event == "cmd_takeoff":
        if state in (FsmState.IDLE, FsmState.LANDED):
            return go(FsmState.TAKEOFF) if not ctx.plan_exhausted else ignored()
        return ignored()

    if event == "path_done":
        if state in ON_PATH:
            if ctx.plan_exhausted:
                return go(FsmState.LANDING)
            return go(FsmState.NAVIGATE)
        return ignored()

    if event == "swap_done":
        if state == FsmState.BATTERY_SWAP:
            return go(FsmState.IDLE) if ctx.plan_exhausted else go(FsmState.TAKEOFF)
        return ignored()

    if event == "swap_timeout":
        if state == FsmState.BATTERY_SWAP:
            return go(FsmState.FAULT)
        return ignored()

    if event == "fix_ok":
        if not ctx.phase_complete:
            return state, []
        if state == FsmState.TAKEOFF:
            return go(FsmState.LANDING) if ctx.plan_exhausted else go(FsmState.NAVIGATE)
        if state == FsmState.NAVIGATE:
            return go(FsmState.LEAD_IN)
        if state == FsmState.LEAD_IN:
            return go(FsmState.DRAWING)
        if state == FsmState.DRAWING:
            return go(FsmState.LEAD_OUT)
        if state == FsmState.LEAD_OUT:
            return state, ["emit_path_done"]
        if state == FsmState.LANDING:
            return go(FsmState.LANDED)
        return ignored()

    return ignored()


# ---------------------------------------------------------------------------
# mission progress
# ---------------------------------------------------------------------------

class ProgressError(ValueError):
    pass


@dataclass
class PathProgress:
    completed: float = 0.0  # drawing-portion arc length finished, m
    done: bool = False


@dataclass
class MissionProgress:
    plan_hash: str
    paths: dict[int, PathProgress]
    spray_seconds: float = 0.0
    current_path_id: int | None = None

    @classmethod
    def fresh(cls, plan: MissionPlan) -> "MissionProgress":
        return cls(plan_hash=plan_hash(plan),
                   paths={p.id: PathProgress() for p in plan.paths})

    def mark(self, path_id: int, completed: float) -> None:
        """Record drawing progress; completed arc never decreases."""
        rec = self.paths[path_id]
        rec.completed = max(rec.completed, completed)

    def mark_done(self, path_id: int, drawing_len: float) -> None:
        rec = self.paths[path_id]
        rec.completed = max(rec.completed, drawing_len)
        rec.done = True

    def next_pending(self, plan: MissionPlan):
        for p in plan.paths:
            if not self.paths[p.id].done:
                return p
        return None

    def reset_path(self, path_id: int) -> None:
        """Explicit operator reset; the one sanctioned way progress drops."""
        self.paths[path_id] = PathProgress()


_PROGRESS_MAGIC = "muralprogress 1"


def save_progress(progress: MissionProgress) -> str:
    lines = [_PROGRESS_MAGIC,
             f"plan {progress.plan_hash}",
             f"current {progress.current_path_id if progress.current_path_id is not None else '-'}",
             f"spray_s {progress.spray_seconds:.6f}"]
    for pid in sorted(progress.paths):
        rec = progress.paths[pid]
        lines.append(f"progress {pid} {rec.completed:.6f} {int(rec.done)}")
    return "\n".join(lines) + "\n"


def load_progress(record: str, plan: MissionPlan) -> MissionProgress:
    lines = [ln for ln in record.splitlines() if ln.strip()]
    if not lines or lines[0] != _PROGRESS_MAGIC:
        raise ProgressError("not a progress record (bad header)")
    header: dict[str, str] = {}
    paths: dict[int, PathProgress] = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "progress":
            pid_s, completed_s, done_s = rest.split()
            paths[int(pid_s)] = PathProgress(completed=float(completed_s),
                                             done=bool(int(done_s)))
        else:
            header[key] = rest
    expected = plan_hash(plan)
    if header.get("plan") != expected:
        raise ProgressError(
            f"progress belongs to plan {header.get('plan', '?')[:12]}..., "
            f"current plan is {expected[:12]}...")
    plan_ids = {p.id for p in plan.paths}
    missing = plan_ids - set(paths)
    extra = set(paths) - plan_ids
    if missing or extra:
        raise ProgressError(
            f"path id mismatch: missing {sorted(missing)}, unknown {sorted(extra)}")
    current = header.get("current", "-")
    return MissionProgress(
        plan_hash=expected,
        paths=paths,
        spray_seconds=float(header.get("spray_s", "0")),
        current_path_id=None if current == "-" else int(current),
    )
