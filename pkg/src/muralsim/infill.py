"""Scanline infill generation for closed contours.

Horizontal scanlines cross the contour set (outer boundary plus holes);
crossings are paired even-odd into interior spans.  Lines alternate
direction, and when voids break a line into several spans each span is
entered at whichever end is closer to the previous exit, keeping
non-drawing hops short.
"""

from __future__ import annotations

import numpy as np


class InfillError(ValueError):
    """Raised when a contour cannot be scanline-filled."""


def _scanline_crossings(contours: list[np.ndarray], v: float) -> np.ndarray:
    """Sorted, deduplicated u-coordinates where the scanline crosses edges.

    Horizontal edges are skipped; a crossing exactly at a shared vertex is
    produced once by each incident edge and collapsed by deduplication.
    """
    us: list[float] = []
    for pts in contours:
        n = len(pts)
        for i in range(n):
            u1, v1 = pts[i]
            u2, v2 = pts[(i + 1) % n]
            if v1 == v2:
                continue
            lo, hi = (v1, v2) if v1 < v2 else (v2, v1)
            if lo <= v <= hi:
                us.append(u1 + (v - v1) * (u2 - u1) / (v2 - v1))
    us.sort()
    dedup: list[float] = []
    for u in us:
        if not dedup or u - dedup[-1] > 1e-9:
            dedup.append(u)
    return np.array(dedup)


def generate_spans(
    contours: list[np.ndarray],
    spacing: float,
    min_span: float,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Infill strokes for one polygon-with-holes as (start, end) pairs.

    ``contours`` holds closed rings as (N, 2) arrays, outer boundary and
    holes together; insideness follows the even-odd rule.  Scanlines run
    at ``v_min + spacing/2 + k*spacing`` so the first and last lines do
    not graze the bounding box edges.  Spans shorter than ``min_span``
    are dropped.  Returns an empty list for degenerate (zero-area) input.
    """
    if spacing <= 0:
        raise InfillError(f"infill spacing must be positive, got {spacing}")
    rings = [np.asarray(c, dtype=float) for c in contours if len(c) >= 3]
    if not rings:
        return []
    all_pts = np.vstack(rings)
    v_min = float(all_pts[:, 1].min())
    v_max = float(all_pts[:, 1].max())
    if v_max - v_min < 1e-12:
        return []
    # all-collinear rings enclose nothing (signed area is useless here:
    # it also cancels for self-intersecting contours, which must error)
    if all(_is_collinear(r) for r in rings):
        return []

    strokes: list[tuple[np.ndarray, np.ndarray]] = []
    cursor: np.ndarray | None = None
    line_index = 0
    v = v_min + spacing / 2.0
    while v < v_max:
        us = _scanline_crossings(rings, v)
        if len(us) % 2:
            raise InfillError(
                f"odd crossing count ({len(us)}) on scanline v={v:.6f}; "
                "contour is self-intersecting or tangent to the line"
            )
        spans = [
            (us[i], us[i + 1])
            for i in range(0, len(us), 2)
            if us[i + 1] - us[i] >= min_span
        ]
        if spans:
            # base traversal order alternates per scanline
            if line_index % 2:
                spans = spans[::-1]
            for ua, ub in spans:
                a = np.array([ua, v])
                b = np.array([ub, v])
                if cursor is not None:
                    # enter at the end closer to the previous exit
                    if np.hypot(*(b - cursor)) < np.hypot(*(a - cursor)):
                        a, b = b, a
                elif line_index % 2:
                    a, b = b, a
                strokes.append((a, b))
                cursor = b
        line_index += 1
        v += spacing
    return strokes


def group_contours(contours: list[np.ndarray]) -> list[list[np.ndarray]]:
    """Nest closed rings into fill groups: each even-depth ring plus its
    immediate children (holes).  Islands inside holes start new groups.
    """
    rings = [np.asarray(c, dtype=float) for c in contours]
    n = len(rings)
    depth = [0] * n
    parent = [-1] * n
    for i in range(n):
        probe = rings[i][0]
        best_area = None
        for j in range(n):
            if i == j:
                continue
            if point_in_polygon(probe, rings[j]):
                area = abs(_signed_area(rings[j]))
                if best_area is None or area < best_area:
                    best_area = area
                    parent[i] = j
        k = parent[i]
        d = 0
        while k != -1:
            d += 1
            k = parent[k]
        depth[i] = d

    groups: list[list[np.ndarray]] = []
    for i in range(n):
        if depth[i] % 2 == 0:
            group = [rings[i]]
            group += [rings[j] for j in range(n) if parent[j] == i]
            groups.append(group)
    return groups


def _is_collinear(ring: np.ndarray, tol: float = 1e-12) -> bool:
    d = ring - ring.mean(axis=0)
    return float(np.linalg.svd(d, compute_uv=False)[-1]) < tol


def _signed_area(ring: np.ndarray) -> float:
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def point_in_polygon(p, ring: np.ndarray) -> bool:
    """Even-odd insideness test (boundary points are implementation-defined)."""
    x, y = float(p[0]), float(p[1])
    inside = False
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside
