import numpy as np
import pytest

from muralsim.geometry import WallFrame
from muralsim.lidar import RansacConfig, fuse, ransac_wall_fit
from muralsim.sim.canvas import Canvas, from_pgm, nominal_peak_cell_mass, render_target, score_masks, to_pgm
from muralsim.sim.config import DroneSetup, Scenario
from muralsim.sim.links import CommandLink, FixLink, LinkConfig
from muralsim.sim.world import World
from muralsim.lidar import NavFix
from muralsim.tracking import MarkerLayout, Tracker, TrackerConfig
from muralsim.sim.runner import true_camera


def one_drone_scenario(**kw) -> Scenario:
    sc = Scenario(drones=[DroneSetup(drone_id="d1")], **kw)
    return sc


def make_world(sc=None, extent=(2.0, 2.0)):
    sc = sc or one_drone_scenario()
    return World(sc, extent, true_camera(sc))


class TestDynamics:
    def test_equilibrium_at_rest(self):
        w = make_world()
        truth = w.drones["d1"]
        p0 = truth.position.copy()
        for k in range(50):
            w.step(k * 0.02, 0.02, {"d1": np.zeros(3)})
        assert np.allclose(truth.position, p0)
        assert np.allclose(truth.velocity, 0.0)

    def test_first_order_response_matches_closed_form(self):
        sc = one_drone_scenario(tau_s=0.3, accel_limit=1e9)
        w = make_world(sc)
        truth = w.drones["d1"]
        cmd = np.array([0.8, 0.0, 0.0])
        dt = 1.0 / sc.tick_hz
        n = 100
        for k in range(n):
            w.step(k * dt, dt, {"d1": cmd})
        # closed form of v' = v + (dt/tau)(c - v):  v_k = c (1 - (1-dt/tau)^k)
        expected = 0.8 * (1.0 - (1.0 - dt / 0.3) ** n)
        assert abs(truth.velocity[0] - expected) < 1e-6

    def test_wind_step_drift_fixed_point(self):
        sc = one_drone_scenario()
        sc.wind.mean_u = 1.0
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.airborne = True
        truth.position[1] = 1.0  # stay off the ground so wind applies
        for k in range(600):
            w.step(k * 0.02, 0.02, {"d1": np.zeros(3)})
        assert abs(truth.velocity[0] - 1.0) < 1e-6

    def test_acceleration_clamp(self):
        sc = one_drone_scenario(accel_limit=2.0)
        w = make_world(sc)
        truth = w.drones["d1"]
        w.step(0.0, 0.02, {"d1": np.array([100.0, 0.0, 0.0])})
        assert np.linalg.norm(truth.velocity) <= 2.0 * 0.02 + 1e-12


class TestSensors:
    def test_noiseless_spot_centroid_matches_projection(self):
        sc = one_drone_scenario()
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.position = np.array([0.8, 1.1, 0.4])
        frame = w.render_camera(0.0, set())
        assert len(frame.positions) == 3
        centroid = frame.positions.mean(axis=0)
        expected = w.camera.project(truth.position)
        assert np.allclose(centroid, expected, atol=1e-9)

    def test_pixel_noise_statistics(self):
        sc = one_drone_scenario()
        sc.sensors.px_sigma = 0.5
        w = make_world(sc)
        w.drones["d1"].position = np.array([1.0, 1.0, 0.5])
        clean = make_world(one_drone_scenario())
        clean.drones["d1"].position = np.array([1.0, 1.0, 0.5])
        ref = clean.render_camera(0.0, set()).positions
        deltas = []
        for k in range(3500):
            frame = w.render_camera(k / 30.0, set())
            deltas.extend((frame.positions - ref).ravel())
        measured = np.std(deltas)
        assert abs(measured - 0.5) / 0.5 < 0.1

    def test_out_of_frustum_no_spots(self):
        w = make_world()
        w.drones["d1"].position = np.array([500.0, 1.0, 0.3])
        frame = w.render_camera(0.0, set())
        assert len(frame.positions) == 0

    def test_occlusion_removes_specific_marker(self):
        w = make_world()
        w.drones["d1"].position = np.array([1.0, 1.0, 0.5])
        frame = w.render_camera(0.0, {("d1", 1)})
        assert len(frame.positions) == 2

    def test_lidar_matches_wall_geometry(self):
        w = make_world()
        truth = w.drones["d1"]
        truth.position = np.array([1.0, 1.0, 1.7])
        truth.yaw = np.radians(12.0)
        scan = w.render_lidar("d1", 0.0)
        fit = ransac_wall_fit(scan, RansacConfig(seed=1))
        assert abs(fit.distance - 1.7) < 1e-9
        assert abs(fit.yaw - np.radians(12.0)) < 1e-9


class TestPaint:
    def test_stationary_mass_conservation(self):
        sc = one_drone_scenario()
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.position = np.array([1.0, 1.0, 0.10])
        truth.spray_on = True
        dt = 1.0 / sc.tick_hz
        for k in range(int(1.0 / dt)):
            w.step(k * dt, dt, {"d1": np.zeros(3)})
        expected = sc.flow_thin_gps * 1.0
        assert abs(w.canvas.total_mass - expected) < 1e-9 * expected
        assert abs((sc.paint_capacity_g - truth.paint_g) - expected) < 1e-9
        assert w.paint_balance_error() < 1e-12

    def test_straight_pass_stroke_width(self):
        sc = one_drone_scenario(canvas_cell=0.002)
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.position = np.array([0.2, 1.0, 0.10])
        truth.velocity = np.array([0.5, 0.0, 0.0])
        truth.spray_on = True
        dt = 1.0 / sc.tick_hz
        k = 0
        while truth.position[0] < 1.8:
            w.step(k * dt, dt, {"d1": np.array([0.5, 0.0, 0.0])})
            k += 1
        nominal_fwhm = 2.354 * sc.sigma_per_n_thin * 0.10  # ~2 cm
        grid = w.canvas.grid
        widths = []
        for iu in range(int(0.5 / sc.canvas_cell), int(1.5 / sc.canvas_cell)):
            col = grid[:, iu]
            peak = col.max()
            if peak <= 0:
                continue
            widths.append((col >= 0.5 * peak).sum() * sc.canvas_cell)
        assert widths
        mean_w = np.mean(widths)
        assert abs(mean_w - nominal_fwhm) / nominal_fwhm < 0.2

    def test_wide_cap_aspect_ratio(self):
        sc = one_drone_scenario()
        sc.drones[0].cap = "wide"
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.cap = "wide"
        truth.position = np.array([1.0, 1.0, 0.10])
        truth.spray_on = True
        dt = 1.0 / sc.tick_hz
        for k in range(25):
            w.step(k * dt, dt, {"d1": np.zeros(3)})
        grid = w.canvas.grid
        vs, us = np.nonzero(grid >= 0.5 * grid.max())
        v_extent = (vs.max() - vs.min() + 1)
        u_extent = (us.max() - us.min() + 1)
        ratio = v_extent / u_extent
        assert abs(ratio - sc.wide_aspect) / sc.wide_aspect < 0.2

    def test_out_of_band_spray_is_lost(self):
        sc = one_drone_scenario()
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.position = np.array([1.0, 1.0, 2.0])  # way off the wall
        truth.spray_on = True
        w.step(0.0, 0.02, {"d1": np.zeros(3)})
        assert w.canvas.total_mass == 0.0
        assert truth.lost_g > 0
        assert w.paint_balance_error() < 1e-12

    def test_paint_exhaustion_event_pro_rata(self):
        sc = one_drone_scenario()
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.position = np.array([1.0, 1.0, 0.10])
        remaining = sc.flow_thin_gps * 0.01  # half a tick of paint left
        truth.paint_g = remaining
        truth.spray_on = True
        events = w.step(0.0, 0.02, {"d1": np.zeros(3)})
        assert ("d1", "paint_empty") in events
        assert truth.paint_g == 0.0
        # the exhausting tick deposits only what was left in the can
        assert abs(w.canvas.total_mass - remaining) < 1e-12

    def test_spray_actuation_delay(self):
        sc = one_drone_scenario()
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.position = np.array([1.0, 1.0, 0.10])
        w.command_spray("d1", True, t=0.0)
        dt = 1.0 / sc.tick_hz
        t = 0.0
        first_on = None
        for k in range(30):
            w.step(t, dt, {"d1": np.zeros(3)})
            if truth.spray_on and first_on is None:
                first_on = t
            t += dt
        assert first_on is not None
        assert abs(first_on - sc.spray_actuation_delay) <= dt + 1e-9


class TestBattery:
    def test_battery_low_event_on_crossing(self):
        sc = one_drone_scenario()
        w = make_world(sc)
        truth = w.drones["d1"]
        truth.airborne = True
        truth.position[1] = 1.0
        truth.battery = sc.battery_low_threshold + 1e-5
        events = []
        for k in range(200):
            events += w.step(k * 0.02, 0.02, {"d1": np.array([1.0, 0, 0])})
        assert events.count(("d1", "battery_low")) == 1  # emitted once

    def test_forced_battery_low(self):
        w = make_world()
        w.force_battery_low("d1")
        events = w.step(0.0, 0.02, {"d1": np.zeros(3)})
        assert ("d1", "battery_low") in events
        w.refill_battery("d1")
        assert w.drones["d1"].battery == 1.0


class TestLinks:
    def cfg(self, outages=()):
        return LinkConfig(latency_primary=0.02, latency_backup=0.06,
                          outages=list(outages))

    def fix(self, t):
        return NavFix(drone_id="d1", timestamp=t, position=np.array([1.0, 1.0, 0.1]),
                      yaw=0.0)

    def test_all_primary_without_outage(self):
        link = FixLink(self.cfg())
        for k in range(30):
            link.send(self.fix(k / 30), k / 30)
        got = link.deliver_due(2.0)
        assert len(got) == 30
        assert all(f.source == "primary_link" for f in got)

    def test_outage_fails_over_to_backup_with_bounded_gap(self):
        link = FixLink(self.cfg(outages=[(1.0, 3.0)]))
        delivered = []
        t = 0.0
        dt = 1.0 / 50.0
        next_fix = 0.0
        while t < 4.0:
            if t >= next_fix - 1e-12:
                link.send(self.fix(t), t)
                next_fix += 1.0 / 30.0
            for f in link.deliver_due(t):
                delivered.append((t, f))
            t += dt
        # sources: primary outside the window, backup inside
        for arr_t, f in delivered:
            if 1.0 + 0.07 < arr_t < 3.0:
                assert f.source == "backup_link"
        gaps = np.diff([arr_t for arr_t, _ in delivered])
        assert gaps.max() < 2.0 / 30.0 + 0.06 + 1e-9

    def test_duplicate_suppression(self):
        link = FixLink(self.cfg())
        link.send(self.fix(0.0), 0.0)
        first = link.deliver_due(0.03)   # primary copy
        late = link.deliver_due(0.10)    # backup copy of the same seq
        assert len(first) == 1 and first[0].source == "primary_link"
        assert late == []

    def test_command_link_drops_in_outage(self):
        link = CommandLink(self.cfg(outages=[(0.0, 1.0)]))
        assert not link.send(("d1", "pause", ()), 0.5)
        assert link.send(("d1", "pause", ()), 1.5)
        assert link.deliver_due(2.0) == [("d1", "pause", ())]


class TestCanvasIo:
    def test_pgm_roundtrip(self):
        c = Canvas.blank((0.5, 0.4), 0.01)
        c.deposit(0.25, 0.2, 0.02, 0.02, 1.0)
        ref = c.grid.max()
        data = to_pgm(c, ref)
        gray = from_pgm(data)
        assert gray.shape == c.grid.shape
        assert gray.max() == 255
        iv, iu = np.unravel_index(np.argmax(c.grid), c.grid.shape)
        assert gray[iv, iu] == 255

    def test_score_masks_identities(self):
        a = np.zeros((10, 10), dtype=bool)
        a[2:5, 2:5] = True
        s = score_masks(a, a)
        assert s.iou == 1.0 and s.coverage == 1.0 and s.overspray == 0.0
        s2 = score_masks(a, ~a)
        assert s2.iou == 0.0

    def test_half_overlap_iou_third(self):
        a = np.zeros((10, 10), dtype=bool)
        b = np.zeros((10, 10), dtype=bool)
        a[0:4, 0:10] = True
        b[2:6, 0:10] = True
        s = score_masks(a, b)
        assert np.isclose(s.iou, 1.0 / 3.0)

    def test_render_target_covers_drawing_only(self):
        from muralsim.compiler import CompileParams, PaintPath, MissionPlan
        path = PaintPath(points=np.array([[-0.3, 0.5], [0.0, 0.5], [1.0, 0.5], [1.3, 0.5]]),
                         lead_in_len=0.3, lead_out_len=0.3, kind="outline", id=0)
        plan = MissionPlan(paths=[path], wall_extent=(1.5, 1.0), params=CompileParams())
        mask = render_target(plan, cell=0.005, stroke_width=0.02)
        vs, us = np.nonzero(mask)
        u_min = us.min() * 0.005
        u_max = us.max() * 0.005
        assert u_min >= -0.015 and abs(u_min) < 0.03
        assert abs(u_max - 1.0) < 0.03  # lead-out region unpainted
