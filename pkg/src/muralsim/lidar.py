"""Wall-line fitting from planar LiDAR scans and beam-distance fusion.

The scan lives in the drone body frame: x forward, y left, bearings in
radians measured from x toward y.  The fitted wall yields the drone's
perpendicular wall distance and its yaw relative to the wall normal
(positive yaw = nose rotated toward +u; with that convention the inward
wall normal appears at body bearing +yaw).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from muralsim import _kernels
from muralsim.geometry import Beam, GeometryError, WallFrame, intersect_beam_at_wall_distance

PRIMARY_LINK = "primary_link"
BACKUP_LINK = "backup_link"


class NoWallError(RuntimeError):
    """Scan does not contain a usable wall line."""


class FixUnavailableError(RuntimeError):
    """Beam and wall distance cannot be combined into a position."""


@dataclass(frozen=True)
class LidarScan:
    timestamp: float
    bearings: np.ndarray  # radians, strictly increasing
    ranges: np.ndarray    # meters, in (0, max_range]
    max_range: float

    def __post_init__(self):
        b = np.asarray(self.bearings, dtype=float)
        r = np.asarray(self.ranges, dtype=float)
        if b.shape != r.shape or b.ndim != 1:
            raise ValueError("bearings and ranges must be matching 1-D arrays")
        if len(b) and (np.diff(b) <= 0).any():
            raise ValueError("bearings must be strictly increasing")
        if len(r) and ((r <= 0) | (r > self.max_range)).any():
            raise ValueError("ranges must lie in (0, max_range]")
        b.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "bearings", b)
        object.__setattr__(self, "ranges", r)

    def cartesian(self) -> np.ndarray:
        return np.column_stack([self.ranges * np.cos(self.bearings),
                                self.ranges * np.sin(self.bearings)])


@dataclass(frozen=True)
class WallFit:
    yaw: float            # radians
    distance: float       # meters, perpendicular
    inlier_count: int
    rms_residual: float
    sample_count: int

    @property
    def quality(self) -> float:
        return self.inlier_count / self.sample_count


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 200
    inlier_tol_m: float = 0.03
    min_inliers: int = 30
    seed: int = 0


@dataclass(frozen=True)
class NavFix:
    drone_id: str
    timestamp: float
    position: np.ndarray  # (u, v, n) wall frame
    yaw: float
    source: str = PRIMARY_LINK
    quality: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,):
            raise ValueError("position must be a (u, v, n) triple")
        p.setflags(write=False)
        object.__setattr__(self, "position", p)
        if self.source not in (PRIMARY_LINK, BACKUP_LINK):
            raise ValueError(f"unknown fix source {self.source!r}")


def _tls_line(xy: np.ndarray) -> tuple[np.ndarray, float]:
    """Total-least-squares line through points: returns (unit normal n, c)
    for the line n . p = c, oriented so c >= 0."""
    centroid = xy.mean(axis=0)
    d = xy - centroid
    _, _, vt = np.linalg.svd(d, full_matrices=False)
    normal = vt[-1]
    c = float(normal @ centroid)
    if c < 0:
        normal, c = -normal, -c
    return normal, c


def ransac_wall_fit(scan: LidarScan, cfg: RansacConfig = RansacConfig()) -> WallFit:
    """Robust wall line from one scan: 2-point RANSAC hypotheses with a
    fixed seed, then total-least-squares refinement over the consensus
    set.  Fully deterministic for identical (scan, cfg)."""
    n = len(scan.ranges)
    if n < cfg.min_inliers:
        raise NoWallError(f"only {n} samples, need at least {cfg.min_inliers}")
    xy = np.ascontiguousarray(scan.cartesian())

    rng = np.random.default_rng(cfg.seed)
    a = rng.integers(0, n, size=cfg.iterations)
    b = rng.integers(0, n - 1, size=cfg.iterations)
    b = b + (b >= a)  # distinct second index, uniform over the rest
    pairs = np.ascontiguousarray(np.column_stack([a, b]).astype(np.int64))

    best_k, best_count = _kernels.ransac_consensus(xy, pairs, cfg.inlier_tol_m)
    if best_count < cfg.min_inliers:
        raise NoWallError(f"best consensus {best_count} below min_inliers {cfg.min_inliers}")
    i, j = pairs[best_k]
    mask = np.asarray(
        _kernels.line_inliers(xy, xy[i, 0], xy[i, 1], xy[j, 0], xy[j, 1], cfg.inlier_tol_m),
        dtype=bool,
    )
    inliers = xy[mask]
    normal, c = _tls_line(inliers)
    if c <= 0:
        raise NoWallError("degenerate wall line through the sensor origin")
    yaw = float(np.arctan2(normal[1], normal[0]))
    if abs(yaw) >= np.pi / 2:
        raise NoWallError(f"fitted wall lies behind the drone (yaw {np.degrees(yaw):.1f} deg)")
    residuals = inliers @ normal - c
    return WallFit(
        yaw=yaw,
        distance=c,
        inlier_count=int(mask.sum()),
        rms_residual=float(np.sqrt(np.mean(residuals**2))),
        sample_count=n,
    )


def fuse(beam: Beam, fit: WallFit, wall: WallFrame, drone_id: str, t: float,
         source: str = PRIMARY_LINK) -> NavFix:
    """Pin the camera beam at the LiDAR wall distance.

    The fused n coordinate is set to ``fit.distance`` exactly; u and v
    come from the beam-plane intersection.
    """
    try:
        p_world = intersect_beam_at_wall_distance(beam, wall, fit.distance)
    except GeometryError as exc:
        raise FixUnavailableError(str(exc)) from exc
    p_wall = wall.to_wall(p_world)
    p_wall[2] = fit.distance
    return NavFix(drone_id=drone_id, timestamp=t, position=p_wall,
                  yaw=fit.yaw, source=source, quality=fit.quality)
