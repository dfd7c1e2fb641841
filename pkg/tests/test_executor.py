"""Executor-level tests with an idealized plant (commands tracked
perfectly), exercising the mission sequencing end to end without the
full sensor pipeline."""

import numpy as np

from muralsim.compiler import CompileParams, MissionPlan, PaintPath
from muralsim.control import ControllerConfig
from muralsim.executor import DroneExecutor, build_resume_path
from muralsim.fsm import FsmState, MissionProgress, load_progress, save_progress
from muralsim.lidar import NavFix

# soft gains suit the harness's lag-free toy plant; these tests exercise
# mission sequencing, not disturbance rejection
CFG = ControllerConfig(kp_n=2.0, kd_n=0.6, kp_w=2.0, kd_w=0.5)


def straight_path(v, pid, length=1.0):
    pts = np.array([[-0.3, v], [0.0, v], [length, v], [length + 0.3, v]])
    return PaintPath(points=pts, lead_in_len=0.3, lead_out_len=0.3, kind="outline", id=pid)


def plan_of(*paths):
    return MissionPlan(paths=list(paths), wall_extent=(3.0, 3.0), params=CompileParams())


class Harness:
    """Perfect-tracking plant: position integrates the command exactly;
    fixes arrive at 30 Hz with no noise."""

    def __init__(self, executor, start=(0.0, 0.02, 0.3)):
        self.ex = executor
        self.pos = np.array(start, dtype=float)
        self.t = 0.0
        self.dt = 1.0 / 30.0
        self.spray_log = []
        self.state_log = []

    def run(self, seconds, events=None):
        events = events or {}
        steps = int(round(seconds / self.dt))
        for _ in range(steps):
            for ev_t, (kind, payload) in list(events.items()):
                if self.t >= ev_t:
                    if kind == "cmd":
                        self.ex.on_command(*payload)
                    else:
                        self.ex.on_vehicle_event(payload)
                    del events[ev_t]
            self.ex.on_fix(NavFix(drone_id=self.ex.drone_id, timestamp=self.t,
                                  position=self.pos.copy(), yaw=0.0))
            cmd, spray = self.ex.step(self.t, self.dt)
            self.pos = self.pos + cmd * self.dt
            self.spray_log.append((self.t, spray, self.pos.copy()))
            self.state_log.append(self.ex.state)
            self.t += self.dt
        return self

    def run_until(self, cond, timeout=60.0):
        deadline = self.t + timeout
        while not cond(self.ex):
            if self.t > deadline:
                raise AssertionError(f"condition never reached (state {self.ex.state})")
            self.run(self.dt)
        return self


class TestMissionSequencing:
    def test_single_path_mission_completes(self):
        ex = DroneExecutor("d1", plan_of(straight_path(0.5, 0)), CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run(30.0)
        assert ex.state == FsmState.LANDED
        assert ex.progress.paths[0].done
        states = set(h.state_log)
        assert {FsmState.TAKEOFF, FsmState.NAVIGATE, FsmState.LEAD_IN,
                FsmState.DRAWING, FsmState.LEAD_OUT, FsmState.LANDING} <= states

    def test_two_paths_in_order(self):
        ex = DroneExecutor("d1", plan_of(straight_path(0.5, 0), straight_path(0.8, 1)), CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run(45.0)
        assert ex.progress.paths[0].done and ex.progress.paths[1].done
        assert ex.state == FsmState.LANDED

    def test_spray_only_while_on_path_states(self):
        ex = DroneExecutor("d1", plan_of(straight_path(0.5, 0)), CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run(30.0)
        for (t, spray, pos), state in zip(h.spray_log, h.state_log):
            if spray:
                assert state in (FsmState.LEAD_IN, FsmState.DRAWING, FsmState.LEAD_OUT)

    def test_sprayed_region_matches_drawing_interval(self):
        ex = DroneExecutor("d1", plan_of(straight_path(0.5, 0)), CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run(30.0)
        sprayed_u = [pos[0] for t, spray, pos in h.spray_log if spray]
        # spray command leads by spray_delay * v_draw = 0.075 m
        assert min(sprayed_u) >= -0.075 - 0.05
        assert max(sprayed_u) <= 1.0 - 0.075 + 0.05
        assert ex.progress.spray_seconds > 0

    def test_land_command_saves_partial_progress(self):
        saves = []
        ex = DroneExecutor("d1", plan_of(straight_path(0.5, 0, length=2.0)), CFG,
                           on_save=saves.append)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run_until(lambda e: e.state == FsmState.DRAWING
                    and e.progress.paths[0].completed > 0.3)
        ex.on_command("land")
        h.run(4.0)
        assert ex.state == FsmState.LANDED
        assert not ex.progress.paths[0].done
        assert ex.progress.paths[0].completed > 0.2
        assert saves  # progress persisted on the transition


class TestResume:
    def test_build_resume_path_geometry(self):
        path = straight_path(0.5, 0, length=2.0)
        resumed = build_resume_path(path, completed=0.8, extension_len=0.3)
        # fresh lead-in ends exactly at the stored arc position
        assert np.allclose(resumed.points[1], [0.8, 0.5])
        assert np.allclose(resumed.points[0], [0.5, 0.5])
        assert resumed.lead_in_len == 0.3
        s0, s1 = resumed.drawing_interval
        assert np.isclose(s1 - s0, 2.0 - 0.8)

    def test_interrupt_and_resume_completes_path(self):
        plan = plan_of(straight_path(0.5, 0, length=2.0))
        ex = DroneExecutor("d1", plan, CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run_until(lambda e: e.state == FsmState.DRAWING
                    and e.progress.paths[0].completed > 0.5)
        ex.on_command("land")
        h.run(4.0)
        record = save_progress(ex.progress)
        completed_before = ex.progress.paths[0].completed
        assert 0 < completed_before < 1.4

        # new executor session resumes from the persisted record
        ex2 = DroneExecutor("d1", plan, CFG, progress=load_progress(record, plan))
        h2 = Harness(ex2, start=h.pos)
        ex2.on_command("takeoff")
        h2.run(25.0)
        assert ex2.progress.paths[0].done
        assert ex2.state == FsmState.LANDED
        # resumed drawing covers only the remainder (plus lead-in overlap)
        drawn_u = [pos[0] for t, spray, pos in h2.spray_log if spray]
        assert min(drawn_u) > completed_before - 0.45


class TestBatterySwap:
    def test_swap_within_limit_resumes(self):
        plan = plan_of(straight_path(0.5, 0, length=2.0), straight_path(0.8, 1))
        ex = DroneExecutor("d1", plan, CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run_until(lambda e: e.state == FsmState.DRAWING
                    and e.progress.paths[0].completed > 0.3)
        ex.on_vehicle_event("battery_low")
        h.run_until(lambda e: e.state == FsmState.BATTERY_SWAP, timeout=20.0)
        h.run(8.0)  # swap takes 8 s, below the 10 s supercap window
        ex.on_vehicle_event("swap_done")
        h.run(40.0)
        assert ex.state == FsmState.LANDED
        assert ex.progress.paths[0].done and ex.progress.paths[1].done

    def test_swap_over_limit_faults(self):
        ex = DroneExecutor("d1", plan_of(straight_path(0.5, 0)), CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run(4.0)
        ex.on_vehicle_event("battery_low")
        h.run(5.0)
        assert ex.state == FsmState.BATTERY_SWAP
        h.run(12.0)  # exceeds the 10 s window with no swap_done
        assert ex.state == FsmState.FAULT
        ex.on_vehicle_event("swap_done")  # too late; systems are down
        assert ex.state == FsmState.FAULT
        ex.on_command("reboot_fcu")
        assert ex.state == FsmState.IDLE

    def test_battery_low_near_stroke_end_finishes(self):
        plan = plan_of(straight_path(0.5, 0, length=1.0))
        ex = DroneExecutor("d1", plan, CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        # run until late in the stroke
        while not (ex.state == FsmState.DRAWING and ex.progress.paths[0].completed > 0.6):
            h.run(h.dt)
            if h.t > 30:
                raise AssertionError("never reached late-drawing phase")
        ex.on_vehicle_event("battery_low")
        h.run(10.0)
        assert ex.progress.paths[0].done  # stroke finished before landing
        assert ex.state in (FsmState.LANDED, FsmState.BATTERY_SWAP)


class TestFixTimeout:
    def test_stale_fixes_hold_and_report(self):
        ex = DroneExecutor("d1", plan_of(straight_path(0.5, 0)), CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run_until(lambda e: e.state == FsmState.DRAWING)
        # stop feeding fixes while airborne; keep stepping time
        t = h.t
        for _ in range(30):
            cmd, spray = ex.step(t, 1 / 30)
            t += 1 / 30
        assert np.allclose(cmd, 0.0)
        assert not spray
        assert any(e.name == "fix_timeout" for e in ex.events)


class TestPauseGoto:
    def test_pause_holds_then_resume_finishes(self):
        plan = plan_of(straight_path(0.5, 0, length=1.5))
        ex = DroneExecutor("d1", plan, CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run_until(lambda e: e.state == FsmState.DRAWING
                    and e.progress.paths[0].completed > 0.3)
        ex.on_command("pause")
        h.run(3.0)
        assert ex.state == FsmState.PAUSED
        # settled onto the hold target after the stopping transient
        assert np.linalg.norm(h.pos - ex._hold_target) < 0.05
        ex.on_command("resume")
        h.run(25.0)
        assert ex.progress.paths[0].done

    def test_goto_flies_to_target_and_holds(self):
        ex = DroneExecutor("d1", plan_of(straight_path(0.5, 0)), CFG)
        h = Harness(ex)
        ex.on_command("takeoff")
        h.run(3.0)
        ex.on_command("goto", (2.0, 1.5, 0.5))
        h.run(10.0)
        assert ex.state == FsmState.PAUSED
        assert np.linalg.norm(h.pos - np.array([2.0, 1.5, 0.5])) < 0.05
