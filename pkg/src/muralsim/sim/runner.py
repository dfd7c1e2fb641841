"""Deterministic fixed-tick simulation loop.

Composes the world, the camera tracker, per-drone wall fitting and
fusion, the failover links and the mission executors, then advances
everything in a strict tick order: deliveries, scripted inputs,
executor steps, plant dynamics, sensor frames, metrics.  Identical
(scenario, plan) inputs produce byte-identical reports.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from muralsim import control as control_mod
from muralsim.calibration import CameraIntrinsics, calibrate_camera
from muralsim.compiler import MissionPlan
from muralsim.executor import DroneExecutor
from muralsim.fsm import ON_PATH, FsmState
from muralsim.geometry import CameraModel, WallFrame, look_at
from muralsim.lidar import NoWallError, RansacConfig, WallFit, fuse, ransac_wall_fit
from muralsim.sim import canvas as canvas_mod
from muralsim.sim.config import Scenario
from muralsim.sim.links import CommandLink, FixLink, in_outage
from muralsim.sim.world import World
from muralsim.tracking import MarkerLayout, Tracker, TrackerConfig

WALL = WallFrame()


def default_marker_layout(scenario: Scenario, extent: tuple[float, float]) -> np.ndarray:
    """Calibration marker positions: the four wall corners, inset."""
    m = scenario.marker_inset
    w, h = extent
    return np.array([
        [m, m, 0.0],
        [w - m, m, 0.0],
        [w - m, h - m, 0.0],
        [m, h - m, 0.0],
    ])


def true_camera(scenario: Scenario) -> CameraModel:
    c = scenario.camera
    pos = np.array([c.u, c.v, c.n])
    return CameraModel(
        focal_px=c.focal_px,
        principal_point=np.array([c.image_w / 2.0, c.image_h / 2.0]),
        position=pos,
        rotation=look_at(pos, np.array([c.look_u, c.look_v, 0.0])),
        image_size=(c.image_w, c.image_h),
    )


@dataclass
class SimReport:
    metrics: dict
    events: list[str]
    canvas_pgm: bytes
    timing: dict

    def metrics_text(self) -> str:
        lines = []
        for k in sorted(self.metrics):
            v = self.metrics[k]
            lines.append(f"{k} = {v:.6f}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def events_text(self) -> str:
        return "\n".join(self.events) + ("\n" if self.events else "")

    def timing_text(self) -> str:
        return "".join(f"{k} = {v:.6f}\n" for k, v in sorted(self.timing.items()))

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "canvas.pgm").write_bytes(self.canvas_pgm)
        (out / "metrics.txt").write_text(self.metrics_text())
        (out / "events.log").write_text(self.events_text())
        # wall-clock diagnostics are intentionally outside the
        # deterministic report surface
        (out / "timing.txt").write_text(self.timing_text())


class Simulation:
    def __init__(self, scenario: Scenario, plan: MissionPlan):
        if not scenario.drones:
            raise ValueError("scenario defines no drones")
        self.sc = scenario
        self.plan = plan
        self.cam_true = true_camera(scenario)
        self.world = World(scenario, plan.wall_extent, self.cam_true)

        # calibration: detected marker pixels -> recovered camera pose
        markers = default_marker_layout(scenario, plan.wall_extent)
        marker_px = np.array([self.cam_true.project(m) for m in markers])
        intr = CameraIntrinsics(focal_px=scenario.camera.focal_px,
                                principal_point=tuple(self.cam_true.principal_point),
                                image_size=self.cam_true.image_size)
        self.cam = calibrate_camera(marker_px, markers, intr)

        layouts = [MarkerLayout(drone_id=d.drone_id,
                                pattern_angle_deg=d.pattern_angle_deg,
                                spacing=d.marker_spacing)
                   for d in scenario.drones]
        self.tracker = Tracker(layouts, self.cam, TrackerConfig())

        all_ids = [p.id for p in plan.paths]
        self.executors: dict[str, DroneExecutor] = {}
        self.progress_records: dict[str, str] = {}
        for d in scenario.drones:
            ids = d.select_ids(all_ids)
            slice_plan = plan.subset(ids) if ids else plan.subset([])
            if not slice_plan.paths:
                raise ValueError(f"drone {d.drone_id} has no paths assigned")
            ex = DroneExecutor(
                d.drone_id, slice_plan, scenario.controller,
                on_save=lambda rec, drone_id=d.drone_id: self.progress_records.__setitem__(
                    drone_id, rec))
            self.executors[d.drone_id] = ex

        self.fix_links = {d.drone_id: FixLink(scenario.link) for d in scenario.drones}
        self.cmd_link = CommandLink(scenario.link)
        self.latest_fit: dict[str, WallFit | None] = {d.drone_id: None
                                                      for d in scenario.drones}
        self._ransac_cfg = {
            d.drone_id: RansacConfig(seed=scenario.seed * 1000 + i)
            for i, d in enumerate(scenario.drones)}

        self.events: list[str] = []
        self._event_counts: dict[str, int] = {}
        self._drained_events: dict[str, int] = {d.drone_id: 0 for d in scenario.drones}

        # loop state (tick-steppable so a live server can drive it too)
        self.dt = 1.0 / scenario.tick_hz
        self._next_cam = 0.0
        self._next_lidar = 0.0
        self._pending_commands = sorted(scenario.commands, key=lambda c: (c.t, c.namespace))
        self._pending_script = sorted(scenario.script, key=lambda s: (s.t, s.drone_id))
        self._swap_due: dict[str, float] = {}
        self._prev_state = {did: ex.state for did, ex in self.executors.items()}
        self._outage_active = False
        self._cross: dict[str, list[float]] = {did: [] for did in self.executors}
        self._speeds: dict[str, list[float]] = {did: [] for did in self.executors}
        self._travel: dict[str, float] = {did: 0.0 for did in self.executors}
        self._fix_counts: dict[str, dict[str, int]] = {
            did: {"primary_link": 0, "backup_link": 0} for did in self.executors}
        self._swaps = 0
        self._t_last = 0.0
        # serve-mode hooks: called with (namespace, message-payload dict)
        self.on_navfix = None
        self.on_telemetry = None
        self.telemetry_hz = 10.0
        self._next_telem = 0.0

    # ------------------------------------------------------------------

    def _log(self, t: float, who: str, what: str, detail: str = "") -> None:
        line = f"{t:.3f} {who} {what}" + (f" {detail}" if detail else "")
        self.events.append(line)
        self._event_counts[what] = self._event_counts.get(what, 0) + 1

    def _drain_executor_events(self, drone_id: str) -> None:
        ex = self.executors[drone_id]
        start = self._drained_events[drone_id]
        for ev in ex.events[start:]:
            self._log(ev.t, drone_id, ev.name, ev.detail)
        self._drained_events[drone_id] = len(ex.events)

    def _emit_telemetry(self, did: str) -> None:
        if self.on_telemetry is None:
            return
        ex = self.executors[did]
        truth = self.world.drones[did]
        self.on_telemetry(did, {
            "fsm": ex.state.value,
            "battery": round(truth.battery, 4),
            "paint_g": round(truth.paint_g, 2),
            "spray_s": round(ex.progress.spray_seconds, 2),
        })

    def inject_command(self, namespace: str, verb: str, args=(),
                       t: float | None = None) -> bool:
        """Operator command entering through the command link (serve mode)."""
        t = self._t_last if t is None else t
        ok = self.cmd_link.send((namespace, verb, tuple(args)), t)
        self._log(t, "gcs", "command" if ok else "command_dropped",
                  f"{namespace} {verb}")
        return ok

    def settled(self) -> bool:
        return (not self._pending_commands and not self._pending_script
                and not self._swap_due and self.cmd_link.in_flight == 0
                and all(ex.state in (FsmState.IDLE, FsmState.LANDED, FsmState.FAULT)
                        for ex in self.executors.values()))

    # ------------------------------------------------------------------

    def tick(self, k: int) -> None:
        """Advance the world by one tick (t = k * dt)."""
        sc = self.sc
        dt = self.dt
        t = k * dt
        self._t_last = t

        # link outage bookkeeping
        now_out = in_outage(sc.link, t)
        if now_out != self._outage_active:
            self._log(t, "link", "outage_start" if now_out else "outage_end")
            self._outage_active = now_out

        # scripted operator commands enter via the command link
        while self._pending_commands and self._pending_commands[0].t <= t:
            c = self._pending_commands.pop(0)
            self.inject_command(c.namespace, c.verb, c.args, t)

        # scripted vehicle conditions
        while self._pending_script and self._pending_script[0].t <= t:
            s = self._pending_script.pop(0)
            if s.event == "battery_low":
                self.world.force_battery_low(s.drone_id)
            elif s.event == "paint_empty":
                self.world.force_paint_empty(s.drone_id)
            self._log(t, s.drone_id, "scripted", s.event)

        # deliveries: commands then fixes, in deterministic drone order
        for ns, verb, args in self.cmd_link.deliver_due(t):
            if ns in self.executors:
                self.executors[ns].on_command(verb, args if args else None)
        for did in self.executors:
            for fix in self.fix_links[did].deliver_due(t):
                self._fix_counts[did][fix.source] += 1
                self.executors[did].on_fix(fix)

        # battery swap completion
        for did, due in list(self._swap_due.items()):
            if t >= due:
                del self._swap_due[did]
                if self.executors[did].state == FsmState.BATTERY_SWAP:
                    self.world.refill_battery(did)
                    self.executors[did].on_vehicle_event("swap_done")
                    self._log(t, did, "swap_done")

        # executor tick -> commands to the plant
        commands: dict[str, np.ndarray] = {}
        for did, ex in self.executors.items():
            cmd, spray = ex.step(t, dt)
            commands[did] = cmd
            self.world.command_spray(did, spray, t)
            if ex.state != self._prev_state[did]:
                if ex.state == FsmState.BATTERY_SWAP:
                    self._swap_due[did] = t + sc.swap_duration_s
                    self._log(t, did, "swap_start",
                              f"scheduled {sc.swap_duration_s:.1f} s")
                self._prev_state[did] = ex.state
                self._emit_telemetry(did)  # state changes go out immediately
            self._drain_executor_events(did)

        # plant
        for did, ev in self.world.step(t, dt, commands):
            self._log(t, did, ev)
            self.executors[did].on_vehicle_event(ev)
            self._drain_executor_events(did)

        # sensors
        if t >= self._next_lidar - 1e-12:
            self._next_lidar += 1.0 / sc.lidar_hz
            for did in self.executors:
                scan = self.world.render_lidar(did, t)
                if scan is None:
                    continue
                try:
                    self.latest_fit[did] = ransac_wall_fit(scan, self._ransac_cfg[did])
                except NoWallError as exc:
                    self._log(t, did, "no_wall_fit", str(exc))
        if t >= self._next_cam - 1e-12:
            self._next_cam += 1.0 / sc.camera_hz
            occluded = {(o.drone_id, o.marker_index)
                        for o in sc.occlusions if o.t0 <= t < o.t1}
            frame = self.world.render_camera(t, occluded)
            beams = self.tracker.track_frame(frame)
            for did, beam in beams:
                fit = self.latest_fit[did]
                if fit is None:
                    continue
                fix = fuse(beam, fit, WALL, did, t)
                self.fix_links[did].send(fix, t)
                if self.on_navfix is not None:
                    self.on_navfix(did, fix)
                # identity audit against ground truth
                own = self.world.drones[did].position
                miss = float(np.linalg.norm(np.cross(own - beam.origin, beam.direction)))
                for other_id, other in self.world.drones.items():
                    if other_id == did:
                        continue
                    wrong = float(np.linalg.norm(np.cross(
                        other.position - beam.origin, beam.direction)))
                    if miss > 0.05 and wrong < 0.5 * miss:
                        self._swaps += 1
                        self._log(t, did, "identity_swap", f"looks like {other_id}")
        if self.on_telemetry is not None and t >= self._next_telem - 1e-12:
            self._next_telem += 1.0 / self.telemetry_hz
            for did in self.executors:
                self._emit_telemetry(did)

        # metrics sampling from ground truth
        for did, ex in self.executors.items():
            truth = self.world.drones[did]
            if ex.state == FsmState.DRAWING and ex.current_path is not None:
                proj = control_mod.project_onto_path(
                    truth.position[:2], ex.current_path, ex.arc_hint)
                self._cross[did].append(abs(proj.cross_track))
                self._speeds[did].append(float(truth.velocity[:2] @ proj.tangent))
            elif truth.airborne and ex.state not in ON_PATH:
                self._travel[did] += float(np.linalg.norm(truth.velocity)) * dt

    def run(self) -> SimReport:
        ticks = int(round(self.sc.duration_s * self.sc.tick_hz))
        wall_start = time.perf_counter()
        self._log(0.0, "sim", "start", f"drones={len(self.executors)}")
        t = 0.0
        for k in range(ticks):
            t = k * self.dt
            self.tick(k)
            if self.settled() and t > 1.0:
                self._log(t, "sim", "complete")
                break
        wall_elapsed = time.perf_counter() - wall_start
        return self.finalize(t + self.dt, wall_elapsed)

    def finalize(self, sim_seconds: float, wall_elapsed: float) -> SimReport:
        sc = self.sc
        metrics = self._build_metrics(self._cross, self._speeds, self._travel,
                                      self._fix_counts, self._swaps, sim_seconds)
        ref = canvas_mod.nominal_peak_cell_mass(
            sc.flow_thin_gps, sc.controller.v_draw,
            sc.sigma_per_n_thin * sc.controller.wall_setpoint, sc.canvas_cell)
        pgm = canvas_mod.to_pgm(self.world.canvas, ref)
        timing = {"wall_clock_s": wall_elapsed,
                  "wall_clock_per_sim_s": wall_elapsed / max(sim_seconds, 1e-9),
                  "realtime_factor": max(sim_seconds, 1e-9) / max(wall_elapsed, 1e-9)}
        return SimReport(metrics=metrics, events=self.events, canvas_pgm=pgm,
                         timing=timing)

    # ------------------------------------------------------------------

    def _build_metrics(self, cross, speeds, travel, fix_counts, swaps,
                       sim_seconds) -> dict:
        sc = self.sc
        m: dict = {"sim_seconds": sim_seconds,
                   "identity_swaps": swaps,
                   "paint_balance_rel_err": self.world.paint_balance_error()}
        for did, ex in self.executors.items():
            m[f"state_final.{did}"] = ex.state.value
            m[f"paths_done.{did}"] = sum(1 for r in ex.progress.paths.values() if r.done)
            m[f"paths_total.{did}"] = len(ex.progress.paths)
            m[f"spray_seconds.{did}"] = ex.progress.spray_seconds
            m[f"travel_nondrawing_m.{did}"] = travel[did]
            m[f"fixes_primary.{did}"] = fix_counts[did]["primary_link"]
            m[f"fixes_backup.{did}"] = fix_counts[did]["backup_link"]
            if cross[did]:
                arr = np.array(cross[did])
                m[f"cross_track_mean_m.{did}"] = float(arr.mean())
                m[f"cross_track_p95_m.{did}"] = float(np.percentile(arr, 95))
            if speeds[did]:
                arr = np.array(speeds[did])
                m[f"draw_speed_mean_mps.{did}"] = float(arr.mean())
                m[f"draw_speed_dev_frac.{did}"] = float(
                    np.abs(arr / sc.controller.v_draw - 1.0).mean())

        assigned = sorted({pid for ex in self.executors.values()
                           for pid in ex.progress.paths})
        target_plan = self.plan.subset(assigned)
        stroke = 2.354 * sc.sigma_per_n_thin * sc.controller.wall_setpoint  # FWHM
        target = canvas_mod.render_target(target_plan, sc.canvas_cell, stroke)
        ref = canvas_mod.nominal_peak_cell_mass(
            sc.flow_thin_gps, sc.controller.v_draw,
            sc.sigma_per_n_thin * sc.controller.wall_setpoint, sc.canvas_cell)
        painted = self.world.canvas.grid >= 0.5 * ref
        score = canvas_mod.score_masks(painted, target)
        m["canvas_iou"] = score.iou
        m["canvas_coverage"] = score.coverage
        m["canvas_overspray"] = score.overspray
        return m


def run_scenario(scenario: Scenario, plan: MissionPlan) -> SimReport:
    return Simulation(scenario, plan).run()
