"""SVG drawing -> ordered, kinematically executable mission plan.

Pipeline: parse + flatten, join/split on tangent angle, prune short
strays, generate scanline infill for closed contours, add lead-in/out
extensions, then order everything bottom-to-top in horizontal bands with
short non-drawing hops inside each band.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from muralsim import infill as infill_mod
from muralsim import svgload

OUTLINE = "outline"
INFILL = "infill"


class CompileError(ValueError):
    """Raised for invalid compile parameters or plan files."""


@dataclass(frozen=True)
class CompileParams:
    extension_len: float = 0.30      # lead-in/out length, m
    join_angle_max: float = 30.0     # max tangent turn to join/continue, deg
    min_path_len: float = 0.04       # prune threshold for unjoined paths, m
    flatten_tol: float = 0.005       # curve flattening tolerance, m
    infill_spacing: float = 0.02     # scanline spacing, m
    infill_min_span: float = 0.01    # spans shorter than this are dropped, m
    band_height: float = 0.5         # ordering band height, m
    scale: float = 0.01              # SVG user units -> meters

    def __post_init__(self):
        for name in ("extension_len", "min_path_len", "flatten_tol",
                     "infill_spacing", "infill_min_span", "band_height", "scale"):
            if getattr(self, name) < 0 or (name != "extension_len" and getattr(self, name) == 0):
                raise CompileError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.join_angle_max < 180:
            raise CompileError(f"join_angle_max must be in (0, 180), got {self.join_angle_max}")


_MIN_VERTEX_SEP = 1e-6


def _arc_lengths(points: np.ndarray) -> np.ndarray:
    seg = np.hypot(*np.diff(points, axis=0).T)
    return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass
class PaintPath:
    """One continuous flight stroke: lead-in, drawing portion, lead-out."""

    points: np.ndarray
    lead_in_len: float
    lead_out_len: float
    kind: str
    id: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise CompileError("a path needs at least two 2D vertices")
        seps = np.hypot(*np.diff(pts, axis=0).T)
        if (seps <= _MIN_VERTEX_SEP).any():
            raise CompileError("consecutive duplicate vertices in path")
        if self.kind not in (OUTLINE, INFILL):
            raise CompileError(f"unknown path kind {self.kind!r}")
        self.points = pts
        self._cum = _arc_lengths(pts)
        if self.lead_in_len < 0 or self.lead_out_len < 0:
            raise CompileError("lead lengths must be non-negative")
        if self.lead_in_len + self.lead_out_len >= self.length + 1e-9:
            raise CompileError("lead-in/out exceed path length")

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    @property
    def cum_lengths(self) -> np.ndarray:
        return self._cum

    @property
    def drawing_interval(self) -> tuple[float, float]:
        return self.lead_in_len, self.length - self.lead_out_len

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(i, len(self.points) - 2)
        seg = self._cum[i + 1] - self._cum[i]
        t = 0.0 if seg <= 0 else (s - self._cum[i]) / seg
        return self.points[i] + t * (self.points[i + 1] - self.points[i])

    def tangent_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(i, len(self.points) - 2)
        d = self.points[i + 1] - self.points[i]
        return d / np.hypot(*d)

    def drawing_points(self) -> np.ndarray:
        """Vertices of the drawing portion, with exact interval endpoints."""
        s0, s1 = self.drawing_interval
        inner = (self._cum > s0 + 1e-12) & (self._cum < s1 - 1e-12)
        pts = [self.point_at(s0), *self.points[inner], self.point_at(s1)]
        return np.array(pts)

    def reversed(self) -> "PaintPath":
        return PaintPath(
            points=self.points[::-1].copy(),
            lead_in_len=self.lead_out_len,
            lead_out_len=self.lead_in_len,
            kind=self.kind,
            id=self.id,
        )


@dataclass
class MissionPlan:
    paths: list[PaintPath]
    wall_extent: tuple[float, float]
    params: CompileParams
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [p.id for p in self.paths]
        if len(set(ids)) != len(ids):
            raise CompileError("path ids are not unique")

    def by_id(self, pid: int) -> PaintPath:
        for p in self.paths:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def subset(self, ids) -> "MissionPlan":
        """Plan slice keeping global order (hence band monotonicity)."""
        wanted = set(ids)
        unknown = wanted - {p.id for p in self.paths}
        if unknown:
            raise CompileError(f"unknown path ids {sorted(unknown)}")
        return MissionPlan(
            paths=[p for p in self.paths if p.id in wanted],
            wall_extent=self.wall_extent,
            params=self.params,
            meta=dict(self.meta),
        )


# ---------------------------------------------------------------------------
# pipeline stages
# ---------------------------------------------------------------------------

def _turn_angle_deg(d1: np.ndarray, d2: np.ndarray) -> float:
    """Angle in degrees between successive direction vectors."""
    c = float(np.dot(d1, d2) / (np.hypot(*d1) * np.hypot(*d2)))
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def _endpoint_join(a: np.ndarray, b: np.ndarray, max_turn: float,
                   tol: float = 1e-3) -> np.ndarray | None:
    """Concatenation of two open polylines if some endpoint pairing is
    within ``tol`` and turns by at most ``max_turn`` degrees."""
    for a_pts, b_pts in (
        (a, b), (a, b[::-1]), (a[::-1], b), (a[::-1], b[::-1]),
    ):
        if np.hypot(*(a_pts[-1] - b_pts[0])) <= tol:
            d_in = a_pts[-1] - a_pts[-2]
            d_out = b_pts[1] - b_pts[0]
            if _turn_angle_deg(d_in, d_out) <= max_turn:
                if np.hypot(*(a_pts[-1] - b_pts[0])) <= _MIN_VERTEX_SEP:
                    return np.vstack([a_pts, b_pts[1:]])
                return np.vstack([a_pts, b_pts])
    return None


def _split_sharp(points: np.ndarray, max_turn: float) -> list[np.ndarray]:
    """Split an open polyline at interior vertices turning more than
    ``max_turn`` degrees; the corner vertex is shared by both pieces."""
    cuts = [0]
    for i in range(1, len(points) - 1):
        if _turn_angle_deg(points[i] - points[i - 1], points[i + 1] - points[i]) > max_turn:
            cuts.append(i)
    cuts.append(len(points) - 1)
    return [points[cuts[k] : cuts[k + 1] + 1] for k in range(len(cuts) - 1)]


def join_split_segments(polylines: list[np.ndarray], params: CompileParams) -> list[np.ndarray]:
    """Join continuations, split sharp corners; iterate to a fixpoint."""
    items = [np.asarray(p, dtype=float) for p in polylines]
    for _ in range(len(items) + 8):
        # join pass
        joined = True
        while joined:
            joined = False
            for i in range(len(items)):
                for j in range(i + 1, len(items)):
                    merged = _endpoint_join(items[i], items[j], params.join_angle_max)
                    if merged is not None:
                        items[i] = merged
                        del items[j]
                        joined = True
                        break
                if joined:
                    break
        # split pass
        split_items: list[np.ndarray] = []
        any_split = False
        for p in items:
            pieces = _split_sharp(p, params.join_angle_max)
            any_split |= len(pieces) > 1
            split_items.extend(pieces)
        items = split_items
        if not any_split:
            break
    return items


def prune_short_paths(polylines: list[np.ndarray], params: CompileParams) -> list[np.ndarray]:
    """Drop open polylines shorter than ``min_path_len`` (already-joined
    material survives inside its longer chain)."""
    return [p for p in polylines if _arc_lengths(p)[-1] >= params.min_path_len]


def add_lead_in_out(points: np.ndarray, params: CompileParams, kind: str, pid: int) -> PaintPath:
    """Extend a drawing polyline with straight lead-in/out segments along
    the end tangents; the drawing geometry is untouched."""
    pts = np.asarray(points, dtype=float)
    ext = params.extension_len
    if ext <= 0:
        return PaintPath(points=pts, lead_in_len=0.0, lead_out_len=0.0, kind=kind, id=pid)
    t_start = pts[1] - pts[0]
    t_start = t_start / np.hypot(*t_start)
    t_end = pts[-1] - pts[-2]
    t_end = t_end / np.hypot(*t_end)
    full = np.vstack([pts[0] - ext * t_start, pts, pts[-1] + ext * t_end])
    return PaintPath(points=full, lead_in_len=ext, lead_out_len=ext, kind=kind, id=pid)


def generate_infill(contours: list[np.ndarray], params: CompileParams) -> list[np.ndarray]:
    """Infill strokes (2-point polylines) for one polygon-with-holes."""
    spans = infill_mod.generate_spans(contours, params.infill_spacing, params.infill_min_span)
    return [np.vstack([a, b]) for a, b in spans]


def _drawing_min_v(path: PaintPath) -> float:
    return float(path.drawing_points()[:, 1].min())


def band_index(path: PaintPath, band_height: float) -> int:
    return int(math.floor(_drawing_min_v(path) / band_height + 1e-9))


def _entry_exit(path: PaintPath, rev: bool) -> tuple[np.ndarray, np.ndarray]:
    return (path.points[-1], path.points[0]) if rev else (path.points[0], path.points[-1])


def _order_band(paths: list[PaintPath], cursor: np.ndarray) -> tuple[list[PaintPath], float, np.ndarray]:
    """Hop-minimizing ordering inside one band.

    Greedy nearest-endpoint seeding (with reversal), then deterministic
    2-opt subsequence reversals and single-path flips until no move
    shortens the travel; falls back to the incoming order if that is
    somehow shorter still.
    """

    def travel_of(seq: list[tuple[PaintPath, bool]]) -> float:
        pos = cursor
        total = 0.0
        for p, rev in seq:
            entry, exit_ = _entry_exit(p, rev)
            total += float(np.hypot(*(entry - pos)))
            pos = exit_
        return total

    remaining = list(paths)
    seq: list[tuple[PaintPath, bool]] = []
    pos = cursor
    while remaining:
        best = None
        for idx, p in enumerate(remaining):
            for rev in (False, True):
                entry, _ = _entry_exit(p, rev)
                d = float(np.hypot(*(entry - pos)))
                if best is None or d < best[0] - 1e-12:
                    best = (d, idx, rev)
        _, idx, rev = best
        p = remaining.pop(idx)
        seq.append((p, rev))
        pos = _entry_exit(p, rev)[1]

    # local improvement: orientation flips, 2-opt subsequence reversals
    # (internal hops are preserved by euclidean symmetry) and single-path
    # relocations, iterated to a fixpoint
    n = len(seq)
    improved = True
    while improved:
        improved = False
        best_travel = travel_of(seq)
        for i in range(n):
            for rev in (False, True):
                if rev == seq[i][1]:
                    continue
                cand = seq.copy()
                cand[i] = (seq[i][0], rev)
                if travel_of(cand) < best_travel - 1e-12:
                    seq, best_travel = cand, travel_of(cand)
                    improved = True
        for i in range(n - 1):
            for j in range(i + 1, n):
                cand = seq[:i] + [(p, not rev) for p, rev in reversed(seq[i:j + 1])] \
                    + seq[j + 1:]
                if travel_of(cand) < best_travel - 1e-12:
                    seq, best_travel = cand, travel_of(cand)
                    improved = True
        for i in range(n):
            removed = seq[:i] + seq[i + 1:]
            for j in range(n):
                if j == i:
                    continue
                for rev in (False, True):
                    cand = removed[:j] + [(seq[i][0], rev)] + removed[j:]
                    if travel_of(cand) < best_travel - 1e-12:
                        seq, best_travel = cand, travel_of(cand)
                        improved = True
                        break
                else:
                    continue
                break

    identity = [(p, False) for p in paths]
    chosen = seq if travel_of(seq) <= travel_of(identity) else identity
    ordered = [p.reversed() if rev else p for p, rev in chosen]
    return ordered, travel_of(chosen), _entry_exit(chosen[-1][0], chosen[-1][1])[1]


def order_paths(paths: list[PaintPath], params: CompileParams,
                wall_extent: tuple[float, float], meta: dict | None = None) -> MissionPlan:
    """Band-monotone bottom-to-top ordering with greedy in-band hops."""
    if not paths:
        raise CompileError("cannot order an empty path list")
    bands: dict[int, list[PaintPath]] = {}
    for p in paths:
        bands.setdefault(band_index(p, params.band_height), []).append(p)
    ordered: list[PaintPath] = []
    cursor = np.zeros(2)  # missions start near the wall origin
    for b in sorted(bands):
        band_paths, _, cursor = _order_band(bands[b], cursor)
        ordered.extend(band_paths)
    return MissionPlan(paths=ordered, wall_extent=wall_extent, params=params,
                       meta=dict(meta or {}))


def total_travel(paths: list[PaintPath], start=(0.0, 0.0)) -> float:
    """Total non-drawing hop distance of a plan ordering."""
    pos = np.asarray(start, dtype=float)
    total = 0.0
    for p in paths:
        total += float(np.hypot(*(p.points[0] - pos)))
        pos = p.points[-1]
    return total


def compile_svg(document: str, params: CompileParams, meta: dict | None = None) -> MissionPlan:
    """Full compilation pipeline from SVG text to an ordered MissionPlan."""
    drawing = svgload.parse_svg(document, params.scale, params.flatten_tol)
    opens = [pl.points for pl in drawing.polylines if not pl.closed]
    rings = [pl.points for pl in drawing.polylines if pl.closed]
    if not opens and not rings:
        raise CompileError("no drawable elements in document")

    opens = join_split_segments(opens, params)
    opens = prune_short_paths(opens, params)

    # contour boundaries are drawn too: close the ring, then split at
    # sharp corners exactly like any other stroke
    boundary_polylines: list[np.ndarray] = []
    for ring in rings:
        loop = np.vstack([ring, ring[0]])
        pieces = _split_sharp(loop, params.join_angle_max)
        # a smooth loop stays whole; pieces of a cornered one are ordinary strokes
        boundary_polylines.extend(pieces)
    boundary_polylines = prune_short_paths(boundary_polylines, params)

    infill_polylines: list[np.ndarray] = []
    for group in infill_mod.group_contours(rings):
        infill_polylines.extend(generate_infill(group, params))

    paths: list[PaintPath] = []
    pid = 0
    for pts in opens + boundary_polylines:
        paths.append(add_lead_in_out(pts, params, OUTLINE, pid))
        pid += 1
    for pts in infill_polylines:
        paths.append(add_lead_in_out(pts, params, INFILL, pid))
        pid += 1
    if not paths:
        raise CompileError("no paths survive preprocessing")
    return order_paths(paths, params, drawing.extent, meta=meta)


# ---------------------------------------------------------------------------
# plan file format
# ---------------------------------------------------------------------------

_MAGIC = "muralplan 1"


def serialize_plan(plan: MissionPlan) -> str:
    """Line-oriented plan file; byte-stable for identical inputs."""
    out = io.StringIO()
    out.write(f"{_MAGIC}\n")
    out.write(f"wall {plan.wall_extent[0]:.6f} {plan.wall_extent[1]:.6f}\n")
    for f in sorted(fields(CompileParams), key=lambda f: f.name):
        out.write(f"param {f.name} {getattr(plan.params, f.name):.6f}\n")
    for k in sorted(plan.meta):
        out.write(f"meta {k} {plan.meta[k]}\n")
    for p in plan.paths:
        coords = " ".join(f"{c:.6f}" for xy in p.points for c in xy)
        out.write(
            f"path {p.id} {p.kind} {p.lead_in_len:.6f} {p.lead_out_len:.6f} "
            f"{len(p.points)} {coords}\n"
        )
    return out.getvalue()


def parse_plan(text: str) -> MissionPlan:
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise CompileError("not a mission plan file (bad header)")
    wall = None
    params_kv: dict[str, float] = {}
    meta: dict[str, str] = {}
    paths: list[PaintPath] = []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        kind, _, rest = ln.partition(" ")
        if kind == "wall":
            w, h = (float(x) for x in rest.split())
            wall = (w, h)
        elif kind == "param":
            name, val = rest.split()
            params_kv[name] = float(val)
        elif kind == "meta":
            name, _, val = rest.partition(" ")
            meta[name] = val
        elif kind == "path":
            toks = rest.split()
            pid, pkind = int(toks[0]), toks[1]
            lead_in, lead_out = float(toks[2]), float(toks[3])
            n = int(toks[4])
            coords = np.array([float(x) for x in toks[5 : 5 + 2 * n]]).reshape(n, 2)
            paths.append(PaintPath(points=coords, lead_in_len=lead_in,
                                   lead_out_len=lead_out, kind=pkind, id=pid))
        else:
            raise CompileError(f"unknown plan record {kind!r}")
    if wall is None:
        raise CompileError("plan file missing wall record")
    unknown = set(params_kv) - {f.name for f in fields(CompileParams)}
    if unknown:
        raise CompileError(f"unknown plan params {sorted(unknown)}")
    return MissionPlan(paths=paths, wall_extent=wall,
                       params=CompileParams(**params_kv), meta=meta)


def plan_hash(plan: MissionPlan) -> str:
    """Stable identity of a plan's geometry (meta excluded)."""
    stripped = replace(plan) if not plan.meta else MissionPlan(
        paths=plan.paths, wall_extent=plan.wall_extent, params=plan.params)
    return hashlib.sha256(serialize_plan(stripped).encode()).hexdigest()
