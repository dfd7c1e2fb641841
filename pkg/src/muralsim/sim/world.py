"""Physics truth and synthetic sensors.

First-order velocity plant with wind, battery/paint bookkeeping, the
delayed spray actuator, Gaussian paint deposition, and inverse sensor
models (marker spots for the camera, wall returns for each LiDAR).
All randomness flows from spawned child generators of the scenario
seed, drawn in a fixed order, so runs are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from muralsim.geometry import CameraModel
from muralsim.lidar import LidarScan
from muralsim.sim.canvas import Canvas
from muralsim.sim.config import DroneSetup, Scenario
from muralsim.tracking import SpotFrame

CAP_THIN = "thin"
CAP_WIDE = "wide"


@dataclass
class DroneTruth:
    drone_id: str
    position: np.ndarray          # (u, v, n)
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    battery: float = 1.0
    paint_g: float = 500.0
    spray_on: bool = False        # actuated state, after cap delay
    cap: str = CAP_THIN
    airborne: bool = False
    deposited_g: float = 0.0
    lost_g: float = 0.0           # overspray off the canvas / out of band

    def marker_points(self, pattern_angle_deg: float, spacing: float) -> list[np.ndarray]:
        """Three collinear markers in the wall-parallel plane through the
        drone center; the wall-plane angle is mirrored so the *image*
        angle of the line equals the layout's pattern angle."""
        t = math.radians(pattern_angle_deg)
        e = np.array([math.cos(t), -math.sin(t), 0.0])
        return [self.position - spacing * e, self.position.copy(),
                self.position + spacing * e]


class Wind:
    """Mean wind plus band-limited gusts: a seeded three-sinusoid mix per
    axis, smooth and deterministic in t."""

    def __init__(self, cfg, rng: np.random.Generator):
        self.mean = np.array([cfg.mean_u, cfg.mean_v, cfg.mean_n])
        self.amp = cfg.gust_amp
        self.freqs = rng.uniform(0.3, 1.7, size=(3, 3)) * cfg.gust_hz
        self.phases = rng.uniform(0, 2 * math.pi, size=(3, 3))
        weights = rng.uniform(0.5, 1.0, size=(3, 3))
        self.weights = weights / np.linalg.norm(weights, axis=1, keepdims=True)

    def at(self, t: float) -> np.ndarray:
        if self.amp == 0.0:
            return self.mean
        gust = (self.weights * np.sin(2 * math.pi * self.freqs * t + self.phases)).sum(axis=1)
        return self.mean + self.amp * gust


class World:
    def __init__(self, scenario: Scenario, extent: tuple[float, float],
                 true_camera: CameraModel):
        self.sc = scenario
        self.camera = true_camera
        self.canvas = Canvas.blank(extent, scenario.canvas_cell)
        seq = np.random.SeedSequence(scenario.seed)
        children = seq.spawn(4 + len(scenario.drones))
        self.wind = Wind(scenario.wind, np.random.default_rng(children[0]))
        self._rng_camera = np.random.default_rng(children[1])
        self._rng_intensity = np.random.default_rng(children[2])
        self._rng_lidar = {d.drone_id: np.random.default_rng(children[4 + i])
                           for i, d in enumerate(scenario.drones)}
        self.drones: dict[str, DroneTruth] = {}
        self.setups: dict[str, DroneSetup] = {}
        for d in scenario.drones:
            self.drones[d.drone_id] = DroneTruth(
                drone_id=d.drone_id,
                position=np.array([d.start_u, d.start_v, d.start_n]),
                paint_g=scenario.paint_capacity_g,
                cap=d.cap,
            )
            self.setups[d.drone_id] = d
        self._spray_toggles: dict[str, list[tuple[float, bool]]] = \
            {d.drone_id: [] for d in scenario.drones}
        self._spray_cmd_state: dict[str, bool] = {d.drone_id: False for d in scenario.drones}
        self._battery_low_armed: dict[str, bool] = {d.drone_id: True for d in scenario.drones}
        self._paint_empty_sent: dict[str, bool] = {d.drone_id: False for d in scenario.drones}

    # ------------------------------------------------------------------
    # actuation
    # ------------------------------------------------------------------

    def command_spray(self, drone_id: str, on: bool, t: float) -> None:
        """Spray command; takes effect after the cap actuation delay."""
        if self._spray_cmd_state[drone_id] != on:
            self._spray_cmd_state[drone_id] = on
            self._spray_toggles[drone_id].append((t + self.sc.spray_actuation_delay, on))

    def refill_battery(self, drone_id: str) -> None:
        self.drones[drone_id].battery = 1.0
        self._battery_low_armed[drone_id] = True

    def force_battery_low(self, drone_id: str) -> None:
        self.drones[drone_id].battery = min(self.drones[drone_id].battery,
                                            self.sc.battery_low_threshold - 1e-6)

    def force_paint_empty(self, drone_id: str) -> None:
        self.drones[drone_id].paint_g = 0.0

    # ------------------------------------------------------------------
    # dynamics
    # ------------------------------------------------------------------

    def step(self, t: float, dt: float, commands: dict[str, np.ndarray]) -> list[tuple[str, str]]:
        """Advance every drone one tick; returns vehicle events as
        (drone_id, event) pairs."""
        events: list[tuple[str, str]] = []
        wind = self.wind.at(t)
        for drone_id in self.drones:
            truth = self.drones[drone_id]
            cmd = commands.get(drone_id)
            cmd = np.zeros(3) if cmd is None else cmd

            # apply due spray toggles (delayed actuator)
            due = [x for x in self._spray_toggles[drone_id] if x[0] <= t]
            if due:
                truth.spray_on = due[-1][1]
                self._spray_toggles[drone_id] = \
                    [x for x in self._spray_toggles[drone_id] if x[0] > t]

            airborne = truth.airborne or float(np.linalg.norm(cmd)) > 1e-9
            wind_felt = wind if airborne else np.zeros(3)
            v_target = truth.velocity + (dt / self.sc.tau_s) * (cmd + wind_felt - truth.velocity)
            dv = v_target - truth.velocity
            dv_norm = float(np.linalg.norm(dv))
            max_dv = self.sc.accel_limit * dt
            if dv_norm > max_dv:
                dv = dv * (max_dv / dv_norm)
            truth.velocity = truth.velocity + dv
            truth.position = truth.position + truth.velocity * dt
            if truth.position[1] <= 0.0:   # ground
                truth.position[1] = 0.0
                truth.velocity[1] = max(truth.velocity[1], 0.0)
            truth.position[2] = max(truth.position[2], 0.0)
            truth.airborne = truth.position[1] > 0.05

            if self.sc.yaw_wobble_rad:
                truth.yaw = self.sc.yaw_wobble_rad * math.sin(
                    2 * math.pi * self.sc.yaw_wobble_hz * t)

            if truth.airborne:
                drain = (self.sc.battery_hover_rate
                         + self.sc.battery_cmd_rate * float(np.linalg.norm(cmd))) * dt
                truth.battery = max(truth.battery - drain, 0.0)
            if self._battery_low_armed[drone_id] \
                    and truth.battery < self.sc.battery_low_threshold:
                self._battery_low_armed[drone_id] = False
                events.append((drone_id, "battery_low"))

            if truth.spray_on and truth.paint_g > 0.0:
                flow = self.sc.flow_thin_gps if truth.cap == CAP_THIN else self.sc.flow_wide_gps
                mass = flow * dt
                if mass > truth.paint_g:  # pro-rata on the exhausting tick
                    mass = truth.paint_g
                truth.paint_g -= mass
                self._deposit(truth, mass)
                if truth.paint_g <= 0.0 and not self._paint_empty_sent[drone_id]:
                    self._paint_empty_sent[drone_id] = True
                    events.append((drone_id, "paint_empty"))
        return events

    def _deposit(self, truth: DroneTruth, mass: float) -> None:
        n = truth.position[2]
        lo, hi = self.sc.spray_band
        if not lo <= n <= hi:
            truth.lost_g += mass
            return
        sigma_u = self.sc.sigma_per_n_thin * n
        sigma_v = sigma_u * (self.sc.wide_aspect if truth.cap == CAP_WIDE else 1.0)
        landed = self.canvas.deposit(truth.position[0], truth.position[1],
                                     sigma_u, sigma_v, mass)
        truth.deposited_g += landed
        truth.lost_g += mass - landed

    # ------------------------------------------------------------------
    # sensors
    # ------------------------------------------------------------------

    def render_camera(self, t: float, occluded: set[tuple[str, int]]) -> SpotFrame:
        """Marker spots for every visible drone, with seeded pixel noise
        and inverse-square intensities."""
        positions: list[np.ndarray] = []
        intensities: list[float] = []
        for drone_id in self.drones:  # insertion order is scenario order
            truth = self.drones[drone_id]
            setup = self.setups[drone_id]
            markers = truth.marker_points(setup.pattern_angle_deg, setup.marker_spacing)
            for idx, m in enumerate(markers):
                if (drone_id, idx) in occluded:
                    continue
                px = self.camera.project_visible(m)
                if px is None:
                    continue
                if self.sc.sensors.px_sigma > 0:
                    px = px + self._rng_camera.normal(0.0, self.sc.sensors.px_sigma, 2)
                    if not self.camera.in_bounds(px):
                        continue
                dist2 = float(np.sum((m - self.camera.position) ** 2))
                intensity = 1e6 / dist2 * (
                    1.0 + self._rng_intensity.normal(0.0, self.sc.sensors.intensity_noise))
                positions.append(px)
                intensities.append(max(intensity, 1e-6))
        if not positions:
            return SpotFrame(timestamp=t, positions=np.empty((0, 2)),
                             intensities=np.empty(0))
        return SpotFrame(timestamp=t, positions=np.array(positions),
                         intensities=np.array(intensities))

    def render_lidar(self, drone_id: str, t: float) -> LidarScan | None:
        """One wall-return sweep for a drone (+-90 deg sector)."""
        truth = self.drones[drone_id]
        sens = self.sc.sensors
        rng = self._rng_lidar[drone_id]
        d = truth.position[2]
        bearings_out: list[float] = []
        ranges_out: list[float] = []
        for b in np.radians(np.linspace(-90.0, 90.0, sens.lidar_rays)):
            c = math.cos(b - truth.yaw)
            if c <= 1e-9:
                continue
            r = d / c
            if sens.range_sigma > 0:
                r += rng.normal(0.0, sens.range_sigma)
            if sens.outlier_frac > 0 and rng.random() < sens.outlier_frac:
                r = rng.uniform(0.2, min(8.0, sens.lidar_max_range))
            if 0.0 < r <= sens.lidar_max_range:
                bearings_out.append(float(b))
                ranges_out.append(float(r))
        if len(bearings_out) < 2:
            return None
        return LidarScan(timestamp=t, bearings=np.array(bearings_out),
                         ranges=np.array(ranges_out), max_range=sens.lidar_max_range)

    # ------------------------------------------------------------------
    # accounting
    # ------------------------------------------------------------------

    def paint_balance_error(self) -> float:
        """Relative error of (canvas + remaining + lost) vs initial paint."""
        initial = self.sc.paint_capacity_g * len(self.drones)
        remaining = sum(d.paint_g for d in self.drones.values())
        lost = sum(d.lost_g for d in self.drones.values())
        return abs(self.canvas.total_mass + remaining + lost - initial) / initial
