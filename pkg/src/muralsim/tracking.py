"""IR marker detection, drone identification and per-drone tracking.

Each drone carries three equally spaced collinear markers; the line's
image angle identifies the drone.  While markers drop out, the tracker
falls back to single/double-marker center estimates inside a fixed-size
area of interest around the last known center.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from muralsim.geometry import Beam, CameraModel, beam_from_pixel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MarkerLayout:
    drone_id: str
    pattern_angle_deg: float  # marker line angle in the image, [0, 180)
    spacing: float            # meters between adjacent markers

    def __post_init__(self):
        if not 0 <= self.pattern_angle_deg < 180:
            raise ValueError("pattern angle must lie in [0, 180)")
        if self.spacing <= 0:
            raise ValueError("marker spacing must be positive")


@dataclass
class SpotFrame:
    timestamp: float
    positions: np.ndarray   # (N, 2) pixels
    intensities: np.ndarray  # (N,)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.intensities = np.asarray(self.intensities, dtype=float).reshape(-1)
        if len(self.positions) != len(self.intensities):
            raise ValueError("positions and intensities length mismatch")
        if len(self.intensities) and (self.intensities <= 0).any():
            raise ValueError("intensities must be positive")


@dataclass
class DroneTrack:
    center: np.ndarray | None = None
    spacing_px: float | None = None  # projected adjacent-marker spacing
    staleness: int = 0               # frames since a full 3-marker sighting

    def aoi(self, image_size: tuple[int, int], size: int = 200) -> tuple[float, float, float, float] | None:
        """(x0, y0, x1, y1) box of exactly ``size`` px, shifted to stay
        inside the image."""
        if self.center is None:
            return None
        w, h = image_size
        half = size / 2.0
        x0 = min(max(self.center[0] - half, 0.0), max(w - size, 0.0))
        y0 = min(max(self.center[1] - half, 0.0), max(h - size, 0.0))
        return (x0, y0, x0 + min(size, w), y0 + min(size, h))


def angle_distance_deg(a: float, b: float) -> float:
    """Distance between undirected line angles (180-degree period)."""
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def detect_and_group(frame: SpotFrame, proximity_px: float,
                     layouts: list[MarkerLayout] | None = None,
                     angle_tolerance_deg: float | None = None,
                     ) -> tuple[list[np.ndarray], np.ndarray]:
    """Brightest-first grouping into marker triplets.

    For each seed spot, candidate companion pairs among the nearby spots
    are tried nearest-first; the first pair forming a plausible triplet
    (collinear, equally spaced, and matching a known pattern angle when
    ``layouts`` is given) wins.  A seed with no valid pair is kept as a
    partial observation and its neighbours stay available, so two drones
    flying close together cannot silently consume each other's markers.

    Returns ``(groups, partial_positions)``.
    """
    n = len(frame.positions)
    if n == 0:
        return [], np.empty((0, 2))
    order = np.lexsort((frame.positions[:, 1], frame.positions[:, 0], -frame.intensities))
    assigned = np.zeros(n, dtype=bool)
    groups: list[np.ndarray] = []
    partial: list[int] = []

    def plausible(triplet: np.ndarray) -> bool:
        if not _triplet_shape_ok(triplet):
            return False
        if layouts is None:
            return True
        tol = 15.0 if angle_tolerance_deg is None else angle_tolerance_deg
        angle = fit_line_angle_deg(triplet)
        return any(angle_distance_deg(angle, l.pattern_angle_deg) <= tol for l in layouts)

    for idx in order:
        if assigned[idx]:
            continue
        free = ~assigned
        free[idx] = False
        cand = np.flatnonzero(free)
        found = False
        if len(cand) >= 2:
            d = np.hypot(*(frame.positions[cand] - frame.positions[idx]).T)
            near = cand[d <= proximity_px]
            if len(near) >= 2:
                d_near = np.hypot(*(frame.positions[near] - frame.positions[idx]).T)
                near = near[np.argsort(d_near, kind="stable")][:6]
                d_map = {int(j): float(np.hypot(*(frame.positions[j] - frame.positions[idx])))
                         for j in near}
                pairs = sorted(
                    ((d_map[int(a)] + d_map[int(b)], int(a), int(b))
                     for ii, a in enumerate(near) for b in near[ii + 1:]),
                )
                for _, a, b in pairs:
                    members = np.array([idx, a, b])
                    triplet = frame.positions[members]
                    if plausible(triplet):
                        assigned[members] = True
                        groups.append(triplet)
                        found = True
                        break
        if not found:
            assigned[idx] = True
            partial.append(idx)
    return groups, frame.positions[partial]


def fit_line_angle_deg(points: np.ndarray) -> float:
    """Total-least-squares line angle through points, folded to [0, 180)."""
    d = points - points.mean(axis=0)
    # principal direction = right singular vector of the centered cloud
    _, _, vt = np.linalg.svd(d, full_matrices=False)
    direction = vt[0]
    return math.degrees(math.atan2(direction[1], direction[0])) % 180.0


def _triplet_shape_ok(group: np.ndarray) -> bool:
    """A marker triplet must be collinear and equally spaced; accidental
    groupings of spots from different drones rarely pass this."""
    d = group - group.mean(axis=0)
    _, s, vt = np.linalg.svd(d, full_matrices=False)
    t = np.sort(d @ vt[0])
    extent = t[2] - t[0]
    if extent < 1e-9:
        return False
    if s[-1] / np.sqrt(3.0) > 0.12 * extent:  # off-line RMS too large
        return False
    gap1, gap2 = t[1] - t[0], t[2] - t[1]
    return abs(gap1 - gap2) <= 0.35 * max(gap1, gap2)


def identify(group: np.ndarray, layouts: list[MarkerLayout],
             angle_tolerance_deg: float) -> tuple[str, np.ndarray] | None:
    """Match a 3-spot group to a drone by line angle; None when the group
    is not a plausible marker triplet or no layout is within tolerance."""
    if group.shape != (3, 2):
        raise ValueError("identify expects exactly three spots")
    if not _triplet_shape_ok(group):
        logger.debug("rejecting malformed triplet %s", group.tolist())
        return None
    angle = fit_line_angle_deg(group)
    best = None
    for layout in layouts:
        d = angle_distance_deg(angle, layout.pattern_angle_deg)
        if d <= angle_tolerance_deg and (best is None or d < best[0]):
            best = (d, layout.drone_id)
    if best is None:
        logger.debug("unidentified triplet at angle %.1f deg", angle)
        return None
    return best[1], group.mean(axis=0)


def estimate_center_partial(spots: np.ndarray, layout: MarkerLayout,
                            track: DroneTrack, spacing_rel_tol: float = 0.30) -> np.ndarray | None:
    """Center estimate from 1-2 visible markers of a known drone.

    Enumerates the marker placements consistent with the projected
    spacing and picks the candidate closest to the previous center.
    """
    if track.center is None or track.spacing_px is None:
        return None
    s = track.spacing_px
    spots = np.asarray(spots, dtype=float).reshape(-1, 2)
    candidates: list[np.ndarray] = []
    if len(spots) == 2:
        sep = float(np.hypot(*(spots[1] - spots[0])))
        if abs(sep - 2 * s) <= spacing_rel_tol * 2 * s:
            candidates.append(0.5 * (spots[0] + spots[1]))  # outer pair
        if abs(sep - s) <= spacing_rel_tol * s:
            candidates.extend([spots[0], spots[1]])  # one of them is the center marker
    elif len(spots) == 1:
        theta = math.radians(layout.pattern_angle_deg)
        e = np.array([math.cos(theta), math.sin(theta)])
        candidates.extend([spots[0], spots[0] + s * e, spots[0] - s * e])
    if not candidates:
        return None
    dists = [float(np.hypot(*(c - track.center))) for c in candidates]
    return candidates[int(np.argmin(dists))]


@dataclass(frozen=True)
class TrackerConfig:
    proximity_px: float = 80.0
    angle_tolerance_deg: float = 15.0
    aoi_size: int = 200
    max_staleness: int = 15  # frames without a full sighting before giving up


class Tracker:
    """Stateful per-frame tracker for a fixed fleet of marker layouts."""

    def __init__(self, layouts: list[MarkerLayout], cam: CameraModel,
                 config: TrackerConfig = TrackerConfig()):
        ids = [l.drone_id for l in layouts]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate drone ids in layouts")
        for i, a in enumerate(layouts):
            for b in layouts[i + 1:]:
                if angle_distance_deg(a.pattern_angle_deg, b.pattern_angle_deg) \
                        < 2 * config.angle_tolerance_deg:
                    raise ValueError(
                        f"pattern angles of {a.drone_id} and {b.drone_id} are closer "
                        f"than twice the angle tolerance")
        self.layouts = list(layouts)
        self.cam = cam
        self.config = config
        self.tracks: dict[str, DroneTrack] = {l.drone_id: DroneTrack() for l in layouts}

    def _full_sighting(self, drone_id: str, center: np.ndarray, group: np.ndarray) -> None:
        track = self.tracks[drone_id]
        track.center = center
        pairwise = [np.hypot(*(group[i] - group[j]))
                    for i in range(3) for j in range(i + 1, 3)]
        track.spacing_px = float(max(pairwise)) / 2.0
        track.staleness = 0

    def track_frame(self, frame: SpotFrame) -> list[tuple[str, Beam]]:
        """Process one camera frame: identify full triplets globally, then
        recover partially visible drones inside their areas of interest.
        Drones with no estimate this frame are absent from the output."""
        cfg = self.config
        groups, partial = detect_and_group(frame, cfg.proximity_px,
                                           self.layouts, cfg.angle_tolerance_deg)
        centers: dict[str, np.ndarray] = {}
        for group in groups:
            hit = identify(group, self.layouts, cfg.angle_tolerance_deg)
            if hit is None:
                continue
            drone_id, center = hit
            if drone_id in centers:
                logger.warning("duplicate triplet for %s; keeping the brighter one", drone_id)
                continue
            centers[drone_id] = center
            self._full_sighting(drone_id, center, group)

        # partial recovery: assign leftover spots to the nearest aoi owner
        claims: dict[str, list[np.ndarray]] = {}
        for spot in partial:
            owners = []
            for layout in self.layouts:
                if layout.drone_id in centers:
                    continue
                track = self.tracks[layout.drone_id]
                box = track.aoi(self.cam.image_size, cfg.aoi_size)
                if box is None or track.staleness >= cfg.max_staleness:
                    continue
                if box[0] <= spot[0] <= box[2] and box[1] <= spot[1] <= box[3]:
                    owners.append((float(np.hypot(*(spot - track.center))), layout.drone_id))
            if not owners:
                continue
            owners.sort()
            if len(owners) > 1:
                logger.debug("spot %s inside %d aois; assigning to %s",
                             spot, len(owners), owners[0][1])
            claims.setdefault(owners[0][1], []).append(spot)

        for layout in self.layouts:
            drone_id = layout.drone_id
            track = self.tracks[drone_id]
            if drone_id in centers:
                continue
            spots = claims.get(drone_id, [])
            if spots:
                if len(spots) > 2:  # keep the two nearest the previous center
                    spots.sort(key=lambda s: float(np.hypot(*(s - track.center))))
                    spots = spots[:2]
                est = estimate_center_partial(np.array(spots), layout, track)
                if est is not None:
                    centers[drone_id] = est
                    track.center = est
            track.staleness += 1

        out: list[tuple[str, Beam]] = []
        for layout in self.layouts:
            drone_id = layout.drone_id
            if drone_id in centers:
                out.append((drone_id, beam_from_pixel(self.cam, centers[drone_id])))
        return out
