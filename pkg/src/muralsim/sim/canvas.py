"""Paint canvas raster, portable graymap io and raster scoring.

The canvas accumulates deposited paint mass per cell.  Exported PGMs
scale gray so 255 equals the center-line density of a nominal stroke;
the painted/unpainted decision then lives at gray >= 128 (half of the
stroke peak), which is also the FWHM stroke-width criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from muralsim import _kernels
from muralsim.compiler import MissionPlan

PAINTED_GRAY = 128


@dataclass
class Canvas:
    extent: tuple[float, float]
    cell: float
    grid: np.ndarray  # (ny, nx) mass in grams

    @classmethod
    def blank(cls, extent: tuple[float, float], cell: float) -> "Canvas":
        nx = max(int(round(extent[0] / cell)), 1)
        ny = max(int(round(extent[1] / cell)), 1)
        return cls(extent=extent, cell=cell, grid=np.zeros((ny, nx)))

    def deposit(self, u: float, v: float, sigma_u: float, sigma_v: float,
                mass: float) -> float:
        """Splat one tick's worth of paint; returns mass landing on the wall."""
        return _kernels.splat_gaussian(self.grid, u, v, sigma_u, sigma_v,
                                       mass, self.cell)

    @property
    def total_mass(self) -> float:
        return float(self.grid.sum())


def nominal_peak_cell_mass(flow_gps: float, v_draw: float, sigma: float,
                           cell: float) -> float:
    """Center-cell mass of an ideal straight pass: line density flow/v
    with a Gaussian cross-section of the given sigma."""
    return flow_gps / (v_draw * sigma * math.sqrt(2 * math.pi)) * cell * cell


def to_pgm(canvas: Canvas, ref_mass: float) -> bytes:
    """Binary PGM; gray 255 == ref_mass (nominal stroke peak), clipped."""
    gray = np.clip(canvas.grid / ref_mass * 255.0, 0, 255).astype(np.uint8)
    gray = gray[::-1]  # raster rows top-down, wall v grows upward
    ny, nx = gray.shape
    header = (f"P5\n# muralsim canvas cell={canvas.cell:.6f} "
              f"extent={canvas.extent[0]:.6f}x{canvas.extent[1]:.6f} "
              f"ref_mass={ref_mass:.9e}\n{nx} {ny}\n255\n")
    return header.encode() + gray.tobytes()


def from_pgm(data: bytes) -> np.ndarray:
    """Gray array (v-up row order) from a binary or ascii PGM."""
    # tokenized header: magic, width, height, maxval; comments skipped
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise ValueError("truncated PGM header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P5":
        body = data[i + 1 : i + 1 + w * h]
        gray = np.frombuffer(body, dtype=np.uint8).reshape(h, w)
    elif magic == b"P2":
        vals = np.array(data[i:].split(), dtype=int).reshape(h, w)
        gray = vals.astype(np.uint8)
    else:
        raise ValueError(f"unsupported raster magic {magic!r}")
    if maxval != 255:
        raise ValueError("only maxval 255 graymaps are supported")
    return gray[::-1]


def render_target(plan: MissionPlan, cell: float, stroke_width: float) -> np.ndarray:
    """Binary raster of the plan's drawing portions at the given stroke
    width: the acceptance reference for what *should* be painted."""
    nx = max(int(round(plan.wall_extent[0] / cell)), 1)
    ny = max(int(round(plan.wall_extent[1] / cell)), 1)
    mask = np.zeros((ny, nx), dtype=bool)
    r = stroke_width / 2.0
    rc = max(int(math.ceil(r / cell)) + 1, 1)
    for path in plan.paths:
        pts = path.drawing_points()
        for a, b in zip(pts[:-1], pts[1:]):
            seg = np.hypot(*(b - a))
            steps = max(int(seg / (cell * 0.5)), 1)
            for s in np.linspace(0.0, 1.0, steps + 1):
                p = a + s * (b - a)
                iu = int(math.floor(p[0] / cell))
                iv = int(math.floor(p[1] / cell))
                u0, u1 = max(iu - rc, 0), min(iu + rc + 1, nx)
                v0, v1 = max(iv - rc, 0), min(iv + rc + 1, ny)
                if u0 >= u1 or v0 >= v1:
                    continue
                # mark cells whose center lies within the stroke radius
                cu = (np.arange(u0, u1) + 0.5) * cell - p[0]
                cv = (np.arange(v0, v1) + 0.5) * cell - p[1]
                mask[v0:v1, u0:u1] |= (cv[:, None] ** 2 + cu[None, :] ** 2) <= r * r
    return mask


@dataclass(frozen=True)
class RasterScore:
    iou: float
    coverage: float   # fraction of target cells painted
    overspray: float  # fraction of painted cells outside the target

    def as_dict(self) -> dict[str, float]:
        return {"iou": self.iou, "coverage": self.coverage, "overspray": self.overspray}


def score_masks(painted: np.ndarray, target: np.ndarray) -> RasterScore:
    if painted.shape != target.shape:
        raise ValueError(f"raster shapes differ: {painted.shape} vs {target.shape}")
    painted = painted.astype(bool)
    target = target.astype(bool)
    inter = float(np.logical_and(painted, target).sum())
    union = float(np.logical_or(painted, target).sum())
    n_target = float(target.sum())
    n_painted = float(painted.sum())
    return RasterScore(
        iou=inter / union if union else 1.0,
        coverage=inter / n_target if n_target else 1.0,
        overspray=(n_painted - inter) / n_painted if n_painted else 0.0,
    )
