"""Per-drone mission executor: consumes fixes, commands and vehicle
events; produces velocity and spray commands.

One executor owns one drone's FSM, controller state and progress
record exclusively.  Control runs event-driven on each incoming fix;
``step`` is called at the simulation tick rate and only handles
time-based duties (fix timeout, battery-swap deadline, spray-second
accounting, command hold)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from muralsim import control
from muralsim.compiler import MissionPlan, PaintPath
from muralsim.control import ControllerConfig
from muralsim.fsm import (
    AIRBORNE,
    ON_PATH,
    SPRAY_STATES,
    SWAP_TIME_LIMIT_S,
    FsmContext,
    FsmState,
    MissionProgress,
    fsm_step,
    save_progress,
)
from muralsim.lidar import NavFix

logger = logging.getLogger(__name__)

ARRIVE_TOL = 0.06       # reaching a navigation target, m (the lead-in
                        # finishes the convergence onto the stroke)
PATH_END_TOL = 0.01     # reaching the end of a lead-out, m
GROUND_V = 0.02         # touchdown height, m
TAKEOFF_V = 0.5         # staging height after takeoff, m
LANDING_STANDOFF_N = 0.35  # back away from the wall while descending, m


def build_resume_path(path: PaintPath, completed: float, extension_len: float) -> PaintPath:
    """Remainder of a partially drawn path with a fresh straight lead-in
    ending at the stored arc position."""
    s0, s1 = path.drawing_interval
    a0 = s0 + completed
    anchor = path.point_at(a0)
    tangent = path.tangent_at(min(a0 + 1e-6, path.length))
    cum = path.cum_lengths
    idx = int(np.searchsorted(cum, a0, side="right"))
    rest = [p for p in path.points[idx:]]
    pts = [anchor - extension_len * tangent, anchor]
    for p in rest:
        if np.hypot(*(p - pts[-1])) > 1e-6:
            pts.append(p)
    return PaintPath(points=np.array(pts), lead_in_len=extension_len,
                     lead_out_len=path.lead_out_len, kind=path.kind, id=path.id)


@dataclass
class ExecutorEvent:
    t: float
    name: str
    detail: str = ""


class DroneExecutor:
    def __init__(self, drone_id: str, plan: MissionPlan, cfg: ControllerConfig,
                 progress: MissionProgress | None = None,
                 on_save: Callable[[str], None] | None = None):
        self.drone_id = drone_id
        self.plan = plan
        self.cfg = cfg
        self.progress = progress if progress is not None else MissionProgress.fresh(plan)
        self.on_save = on_save
        self.state = FsmState.IDLE

        self.last_fix: NavFix | None = None
        self.prev_fix: NavFix | None = None
        self.cmd = np.zeros(3)
        self.spray_cmd = False
        self.events: list[ExecutorEvent] = []

        self._flight_path: PaintPath | None = None
        self._original: PaintPath | None = None
        self._arc_offset = 0.0   # drawing arc already completed before resume
        self._arc_hint = 0.0
        self._paused_from: FsmState | None = None
        self._hold_target: np.ndarray | None = None
        self._landing_target: np.ndarray | None = None
        self._takeoff_target: np.ndarray | None = None
        self._finish_then_land = False
        self._battery_low = False
        self._paint_empty = False
        self._swap_start: float | None = None
        self._stale_reported = False
        self._now = 0.0
        self._nav_integral = np.zeros(3)
        self._nav_target_key: tuple | None = None

    @property
    def current_path(self) -> PaintPath | None:
        """The path geometry currently being flown (resume-adjusted)."""
        return self._flight_path

    @property
    def arc_hint(self) -> float:
        return self._arc_hint

    # ------------------------------------------------------------------
    # event plumbing
    # ------------------------------------------------------------------

    def _log(self, name: str, detail: str = "") -> None:
        self.events.append(ExecutorEvent(t=self._now, name=name, detail=detail))

    def _ctx(self, phase_complete: bool = False) -> FsmContext:
        exhausted = self.progress.next_pending(self.plan) is None or self._finish_then_land
        remaining = None
        if self.state == FsmState.DRAWING and self._flight_path is not None:
            s1 = self._flight_path.drawing_interval[1]
            remaining = max(s1 - self._arc_hint, 0.0) / self.cfg.v_draw
        return FsmContext(phase_complete=phase_complete, plan_exhausted=exhausted,
                          remaining_stroke_s=remaining, paused_from=self._paused_from)

    def _dispatch(self, event: str, phase_complete: bool = False) -> None:
        old = self.state
        new_state, actions = fsm_step(old, event, self._ctx(phase_complete))
        for action in actions:
            if action == "save_progress":
                self._save()
            elif action == "hold":
                self.cmd = np.zeros(3)
                if self._hold_target is None and self.last_fix is not None:
                    self._hold_target = self.last_fix.position.copy()
            elif action == "finish_then_land":
                if not self._finish_then_land:
                    self._finish_then_land = True
                    self._log("finish_then_land", "completing stroke before landing")
            elif action == "abort_stroke":
                self._log("abort_stroke", f"path {self._original.id if self._original else '-'}")
            elif action == "emit_path_done":
                self._complete_current_path()
                return
        if new_state != old:
            self.state = new_state
            self._log("state", f"{old.value} -> {new_state.value} ({event})")
            self._on_enter(new_state, old)

    def _on_enter(self, state: FsmState, old: FsmState) -> None:
        if state == FsmState.PAUSED:
            self._paused_from = old if old != FsmState.PAUSED else self._paused_from
            if self._hold_target is None and self.last_fix is not None:
                self._hold_target = self.last_fix.position.copy()
        else:
            self._hold_target = None
        if state == FsmState.TAKEOFF:
            self._takeoff_target = None
        if state == FsmState.NAVIGATE:
            self._prepare_next_path()
        if state == FsmState.LANDING and self.last_fix is not None:
            self._landing_target = np.array(
                [self.last_fix.position[0], GROUND_V, LANDING_STANDOFF_N])
        if state == FsmState.BATTERY_SWAP:
            self._swap_start = self._now
            self.cmd = np.zeros(3)
        if state in (FsmState.IDLE, FsmState.LANDED, FsmState.FAULT):
            self.cmd = np.zeros(3)
        if state == FsmState.LANDED and self._battery_low:
            self._dispatch("battery_low")

    def _save(self) -> None:
        if self.on_save is not None:
            self.on_save(save_progress(self.progress))

    def _prepare_next_path(self) -> None:
        path = self.progress.next_pending(self.plan)
        if path is None:
            self._flight_path = None
            self._original = None
            return
        self._original = path
        done_arc = self.progress.paths[path.id].completed
        s0, s1 = path.drawing_interval
        if done_arc <= 1e-9:
            self._flight_path = path
            self._arc_offset = 0.0
        else:
            ext = self.plan.params.extension_len if self.plan.params.extension_len > 0 else 0.30
            self._flight_path = build_resume_path(path, done_arc, ext)
            self._arc_offset = done_arc
            self._log("resume", f"path {path.id} at {done_arc:.3f} m")
        self._arc_hint = 0.0
        self.progress.current_path_id = path.id

    def _complete_current_path(self) -> None:
        if self._original is not None:
            s0, s1 = self._original.drawing_interval
            self.progress.mark_done(self._original.id, s1 - s0)
            self._log("path_done", f"path {self._original.id}")
        self.progress.current_path_id = None
        self._flight_path = None
        self._original = None
        self._dispatch("path_done")

    # ------------------------------------------------------------------
    # inputs
    # ------------------------------------------------------------------

    def on_command(self, verb: str, args=None) -> None:
        if verb == "takeoff":
            self._dispatch("cmd_takeoff")
        elif verb == "land":
            self._dispatch("cmd_land")
        elif verb == "pause":
            self._dispatch("cmd_pause")
        elif verb in ("resume", "draw"):
            self._dispatch("cmd_resume")
        elif verb == "goto":
            target = np.asarray(args, dtype=float).reshape(3)
            self._hold_target = target
            self._dispatch("cmd_goto")
            self._hold_target = target  # survive the PAUSED enter hook
        elif verb == "reboot_fcu":
            self._log("reboot", f"from {self.state.value}")
            self.state = FsmState.IDLE
            self.cmd = np.zeros(3)
            self.spray_cmd = False
            self._finish_then_land = False
            self._battery_low = False
            self._paint_empty = False
            self._flight_path = None
            self._original = None
            self._swap_start = None
        else:
            self._log("bad_command", verb)

    def on_vehicle_event(self, name: str) -> None:
        if name == "battery_low":
            self._battery_low = True
            self._dispatch("battery_low")
        elif name == "paint_empty":
            self._paint_empty = True
            self._dispatch("paint_empty")
        elif name == "swap_done":
            self._battery_low = False
            self._dispatch("swap_done")
        else:
            self._log("bad_event", name)

    def _goto(self, fix: NavFix, target: np.ndarray) -> np.ndarray:
        """PI homing with integral state reset on target changes."""
        key = tuple(np.round(target, 6))
        if key != self._nav_target_key:
            self._nav_target_key = key
            self._nav_integral = np.zeros(3)
        dt = 0.0
        if self.prev_fix is not None:
            dt = max(fix.timestamp - self.prev_fix.timestamp, 0.0)
        return control.goto_velocity(fix.position, target, self.cfg,
                                     integral=self._nav_integral, dt=dt)

    def on_fix(self, fix: NavFix) -> None:
        self.prev_fix, self.last_fix = self.last_fix, fix
        self._stale_reported = False
        if self.state not in AIRBORNE or self.state == FsmState.PAUSED:
            if self.state == FsmState.PAUSED and self._hold_target is not None:
                self.cmd = self._goto(fix, self._hold_target)
            self._dispatch("fix_ok")
            return
        phase_complete = False
        if self.state == FsmState.TAKEOFF:
            if self._takeoff_target is None:
                self._takeoff_target = np.array(
                    [fix.position[0], max(TAKEOFF_V, fix.position[1]), self.cfg.wall_setpoint])
            self.cmd = self._goto(fix, self._takeoff_target)
            phase_complete = np.linalg.norm(fix.position - self._takeoff_target) < ARRIVE_TOL
        elif self.state == FsmState.NAVIGATE:
            if self._flight_path is None:
                phase_complete = True  # nothing to fly; guard will land
                self.cmd = np.zeros(3)
            else:
                entry = np.array([*self._flight_path.points[0], self.cfg.wall_setpoint])
                self.cmd = self._goto(fix, entry)
                phase_complete = np.linalg.norm(fix.position - entry) < ARRIVE_TOL
        elif self.state in ON_PATH:
            path = self._flight_path
            if path is None:
                self._dispatch("path_done")
                return
            if self.prev_fix is not None and fix.timestamp > self.prev_fix.timestamp:
                self.cmd, proj = control.control_step(
                    fix, self.prev_fix, path, self._arc_hint, self.cfg, control.DRAWING)
                self._arc_hint = proj.arc_s
            arc = self._arc_hint
            s0, s1 = path.drawing_interval
            if self.state == FsmState.DRAWING:
                done = self._arc_offset + min(max(arc - s0, 0.0), s1 - s0)
                self.progress.mark(self._original.id, done)
            if self.state == FsmState.LEAD_IN:
                phase_complete = arc >= s0
            elif self.state == FsmState.DRAWING:
                phase_complete = arc >= s1
            else:
                phase_complete = arc >= path.length - PATH_END_TOL
        elif self.state == FsmState.LANDING:
            if self._landing_target is None:
                self._landing_target = np.array(
                    [fix.position[0], GROUND_V, LANDING_STANDOFF_N])
            self.cmd = self._goto(fix, self._landing_target)
            phase_complete = abs(fix.position[1] - GROUND_V) < ARRIVE_TOL
        self._dispatch("fix_ok", phase_complete=phase_complete)
        self._update_spray()

    def _update_spray(self, now: float | None = None) -> None:
        on = False
        if self.state in SPRAY_STATES and self._flight_path is not None and not self._paint_empty:
            arc = self._arc_hint
            if now is not None and self.last_fix is not None:
                # dead-reckon between fixes so spray timing does not lag
                # the 30 Hz fix stream plus link latency; a stale stream
                # kills the spray outright
                age = max(now - self.last_fix.timestamp, 0.0)
                if age > self.cfg.fix_timeout:
                    self.spray_cmd = False
                    return
                arc = self._arc_hint + self.cfg.v_draw * age
            on = control.spray_schedule(self._flight_path, arc, self.cfg)
        self.spray_cmd = on

    # ------------------------------------------------------------------
    # tick
    # ------------------------------------------------------------------

    def step(self, now: float, dt: float) -> tuple[np.ndarray, bool]:
        """Advance time-based logic; returns (velocity command, spray)."""
        self._now = now
        if self.state == FsmState.BATTERY_SWAP and self._swap_start is not None \
                and now - self._swap_start > SWAP_TIME_LIMIT_S:
            self._log("swap_timeout", f"{now - self._swap_start:.1f} s")
            self._dispatch("swap_timeout")
        if self.state in AIRBORNE and self.last_fix is not None \
                and now - self.last_fix.timestamp > self.cfg.fix_timeout:
            if not self._stale_reported:
                self._log("fix_timeout", f"last fix {now - self.last_fix.timestamp:.2f} s old")
                self._stale_reported = True
            self._dispatch("fix_timeout")
            self.spray_cmd = False
        if self.state not in AIRBORNE:
            self.cmd = np.zeros(3)
        self._update_spray(now)
        if self.spray_cmd:
            self.progress.spray_seconds += dt
        return self.cmd.copy(), self.spray_cmd
