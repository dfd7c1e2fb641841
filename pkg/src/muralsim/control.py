"""Dual-regime trajectory tracking and spray timing.

Along the path the drone flies at a constant target speed (uniform
stroke thickness matters more than exact along-track position); normal
to the path and toward the wall, PD regulators convert position error
into velocity commands.  Spray actuation leads the drawing boundary by
``spray_delay * v_draw`` so paint starts flowing exactly at the stroke.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from muralsim import _kernels
from muralsim.compiler import PaintPath
from muralsim.lidar import NavFix

DRAWING = "drawing"
TRAVEL = "travel"


@dataclass(frozen=True)
class ControllerConfig:
    v_draw: float = 0.5        # constant drawing speed, m/s
    v_travel: float = 1.5      # inter-path travel speed, m/s
    # The plant accepts velocity commands and drifts with the wind, so the
    # position loops must supply all of the disturbance rejection; stiff
    # PD keeps gust-induced cross-track within the drawing tolerance.
    kp_n: float = 35.0         # cross-track P gain, 1/s
    kd_n: float = 4.5          # cross-track D gain
    kp_w: float = 35.0         # wall-distance P gain, 1/s
    kd_w: float = 4.5          # wall-distance D gain
    nav_kp: float = 6.0        # travel/hold position P gain, 1/s
    nav_ki: float = 1.0        # travel/hold integral gain (wind trim), 1/s^2
    wall_setpoint: float = 0.10   # nozzle-to-wall distance, m
    spray_delay: float = 0.15     # actuation lag compensated by early trigger, s
    v_max: float = 2.5        # command magnitude clamp, m/s
    fix_timeout: float = 0.3  # hold position when fixes are older than this, s

    def __post_init__(self):
        if min(self.kp_n, self.kd_n, self.kp_w, self.kd_w) < 0:
            raise ValueError("PD gains must be non-negative")
        if not 0 < self.v_draw <= self.v_max:
            raise ValueError("need 0 < v_draw <= v_max")
        if not 0 < self.v_travel <= self.v_max:
            raise ValueError("need 0 < v_travel <= v_max")
        if self.wall_setpoint <= 0:
            raise ValueError("wall setpoint must be positive")
        if self.nav_kp < 0 or self.nav_ki < 0:
            raise ValueError("navigation gains must be non-negative")
        if not 0.10 <= self.spray_delay <= 0.20:
            raise ValueError("spray delay must lie in [0.10, 0.20] s")
        if self.fix_timeout <= 0:
            raise ValueError("fix timeout must be positive")


@dataclass(frozen=True)
class PathProjection:
    arc_s: float
    point: np.ndarray
    tangent: np.ndarray
    cross_track: float  # signed, left-of-tangent positive


class StaleFixError(RuntimeError):
    pass


def project_onto_path(pos, path: PaintPath, hint: float,
                      window: float = 0.5) -> PathProjection:
    """Project a wall-plane position onto the path near ``hint``.

    The search is restricted to ``hint +- window`` of arc length so the
    projection cannot snap to a distant revisit of the same region (e.g.
    the far leg of a U-shaped path).
    """
    pos = np.asarray(pos, dtype=float)[:2]
    cum = path.cum_lengths
    lo = float(np.clip(hint - window, 0.0, path.length))
    hi = float(np.clip(hint + window, 0.0, path.length))
    i0 = max(int(np.searchsorted(cum, lo, side="right")) - 1, 0)
    i1 = min(int(np.searchsorted(cum, hi, side="left")), len(path.points) - 1)
    i1 = max(i1, i0 + 1)
    seg, t, _ = _kernels.project_polyline(
        np.ascontiguousarray(path.points), float(pos[0]), float(pos[1]), i0, i1)
    a = path.points[seg]
    b = path.points[seg + 1]
    d = b - a
    seg_len = float(np.hypot(*d))
    tangent = d / seg_len
    point = a + t * d
    arc_s = float(cum[seg] + t * seg_len)
    offset = pos - point
    cross = float(tangent[0] * offset[1] - tangent[1] * offset[0])
    return PathProjection(arc_s=arc_s, point=point, tangent=tangent, cross_track=cross)


def control_step(fix: NavFix, fix_prev: NavFix, path: PaintPath, hint: float,
                 cfg: ControllerConfig, mode: str = DRAWING) -> tuple[np.ndarray, PathProjection]:
    """One velocity command from two consecutive fixes.

    Tangential speed is open loop (v_draw or v_travel along the local
    tangent); cross-track and wall distance close PD loops on the fix
    stream.  The command is clamped to v_max preserving direction.
    """
    dt = fix.timestamp - fix_prev.timestamp
    if dt <= 0:
        raise ValueError("fixes must be strictly ordered in time")
    proj = project_onto_path(fix.position[:2], path, hint)
    proj_prev = project_onto_path(fix_prev.position[:2], path, hint)

    speed = cfg.v_draw if mode == DRAWING else cfg.v_travel
    e = proj.cross_track
    e_dot = (proj.cross_track - proj_prev.cross_track) / dt
    normal = np.array([-proj.tangent[1], proj.tangent[0]])  # left of tangent
    uv = speed * proj.tangent - (cfg.kp_n * e + cfg.kd_n * e_dot) * normal

    n_err = fix.position[2] - cfg.wall_setpoint
    n_dot = (fix.position[2] - fix_prev.position[2]) / dt
    n_cmd = -(cfg.kp_w * n_err + cfg.kd_w * n_dot)

    cmd = np.array([uv[0], uv[1], n_cmd])
    return clamp_speed(cmd, cfg.v_max), proj


def clamp_speed(cmd: np.ndarray, v_max: float) -> np.ndarray:
    norm = float(np.linalg.norm(cmd))
    if norm > v_max:
        return cmd * (v_max / norm)
    return cmd


def goto_velocity(pos, target, cfg: ControllerConfig,
                  integral=None, dt: float = 0.0) -> np.ndarray:
    """PI homing used for takeoff/navigate/landing/hold phases.

    The integral term (owned by the caller, updated in place) trims out
    steady wind; without it a velocity-commanded drone parks short of its
    target by wind/kp and never arrives.
    """
    err = np.asarray(target, dtype=float) - np.asarray(pos, dtype=float)
    cmd = cfg.nav_kp * err
    if integral is not None and dt > 0 and cfg.nav_ki > 0:
        if float(np.linalg.norm(err)) < 0.3:  # anti-windup: trim only near the target
            integral += err * dt
            limit = 1.0 / cfg.nav_ki  # cap the integral's velocity authority
            np.clip(integral, -limit, limit, out=integral)
        cmd = cmd + cfg.nav_ki * integral
    return clamp_speed(cmd, cfg.v_travel)


def spray_window(path: PaintPath, cfg: ControllerConfig) -> tuple[float, float]:
    """Arc interval [on, off) during which the spray command is held on.

    Both edges lead the drawing boundary by ``spray_delay * v_draw`` so
    the delayed actuator opens/closes the flow exactly at the stroke
    limits when moving at v_draw.
    """
    lead = cfg.spray_delay * cfg.v_draw
    s0, s1 = path.drawing_interval
    return max(s0 - lead, 0.0), max(s1 - lead, 0.0)


def spray_schedule(path: PaintPath, arc_s: float, cfg: ControllerConfig) -> bool:
    on, off = spray_window(path, cfg)
    return on <= arc_s < off
