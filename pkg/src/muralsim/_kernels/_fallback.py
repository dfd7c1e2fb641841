"""Pure-numpy implementations of the simulation hot kernels.

Mirrors ``_speedups.pyx`` exactly: same tie-breaking, same windowing,
same normalization.  Either backend may be active; results agree to
floating-point round-off.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def splat_gaussian(grid, cu, cv, su, sv, mass, cell, extent=4.0):
    """Deposit ``mass`` with a separable Gaussian footprint onto ``grid``.

    ``grid`` is indexed ``[iv, iu]``; cell ``(iu, iv)`` is centered at
    ``((iu + 0.5) * cell, (iv + 0.5) * cell)``.  Weights are normalized
    over the full ``extent``-sigma window *before* clipping, so mass
    falling outside the grid is genuinely lost, not redistributed.

    Returns the mass actually deposited onto the grid.
    """
    ny, nx = grid.shape
    ju0 = int(np.floor((cu - extent * su) / cell - 0.5))
    ju1 = int(np.ceil((cu + extent * su) / cell - 0.5))
    jv0 = int(np.floor((cv - extent * sv) / cell - 0.5))
    jv1 = int(np.ceil((cv + extent * sv) / cell - 0.5))
    xs = (np.arange(ju0, ju1 + 1) + 0.5) * cell
    ys = (np.arange(jv0, jv1 + 1) + 0.5) * cell
    wx = np.exp(-0.5 * ((xs - cu) / su) ** 2)
    wy = np.exp(-0.5 * ((ys - cv) / sv) ** 2)
    total = float(wy.sum() * wx.sum())
    if total <= 0.0:
        return 0.0
    iu0, iu1 = max(ju0, 0), min(ju1, nx - 1)
    iv0, iv1 = max(jv0, 0), min(jv1, ny - 1)
    if iu0 > iu1 or iv0 > iv1:
        return 0.0
    w = np.outer(wy[iv0 - jv0 : iv1 - jv0 + 1], wx[iu0 - ju0 : iu1 - ju0 + 1])
    grid[iv0 : iv1 + 1, iu0 : iu1 + 1] += (mass / total) * w
    return mass * float(w.sum()) / total


def ransac_consensus(xy, pairs, tol):
    """Score 2-point line hypotheses against a point set.

    ``xy`` is (N, 2), ``pairs`` (K, 2) integer sample indices.  Returns
    ``(best_k, best_count)`` where ``best_k`` is the first hypothesis
    achieving the maximal inlier count (strictly-greater wins, so the
    scan order fixes ties).  Degenerate pairs (coincident points) score
    zero.
    """
    xy = np.asarray(xy, dtype=float)
    pairs = np.asarray(pairs, dtype=np.int64)
    p = xy[pairs[:, 0]]
    q = xy[pairs[:, 1]]
    d = q - p
    norms = np.hypot(d[:, 0], d[:, 1])
    ok = norms > 1e-12
    nx = np.where(ok, -d[:, 1] / np.where(ok, norms, 1.0), 0.0)
    ny = np.where(ok, d[:, 0] / np.where(ok, norms, 1.0), 0.0)
    # residual of every point against every hypothesis: (K, N)
    res = np.abs(
        (xy[None, :, 0] - p[:, 0, None]) * nx[:, None]
        + (xy[None, :, 1] - p[:, 1, None]) * ny[:, None]
    )
    counts = np.where(ok, (res <= tol).sum(axis=1), 0)
    best_k = int(np.argmax(counts))  # argmax returns the first maximum
    return best_k, int(counts[best_k])


def line_inliers(xy, px, py, qx, qy, tol):
    """Boolean inlier mask of ``xy`` against the line through (p, q)."""
    xy = np.asarray(xy, dtype=float)
    dx = qx - px
    dy = qy - py
    norm = float(np.hypot(dx, dy))
    if norm < 1e-12:
        return np.zeros(len(xy), dtype=bool)
    nx = -dy / norm
    ny = dx / norm
    res = np.abs((xy[:, 0] - px) * nx + (xy[:, 1] - py) * ny)
    return res <= tol


def project_polyline(pts, px, py, i0, i1):
    """Closest point on polyline segments ``[i0, i1)`` to ``(px, py)``.

    Returns ``(seg_index, seg_param, dist_sq)``; ties go to the lowest
    segment index.  ``pts`` is (N, 2) with N >= 2 and i1 <= N - 1.
    """
    pts = np.asarray(pts, dtype=float)
    a = pts[i0:i1]
    b = pts[i0 + 1 : i1 + 1]
    ab = b - a
    ap_x = px - a[:, 0]
    ap_y = py - a[:, 1]
    len2 = ab[:, 0] ** 2 + ab[:, 1] ** 2
    t = np.where(len2 > 0, (ap_x * ab[:, 0] + ap_y * ab[:, 1]) / np.where(len2 > 0, len2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    dx = ap_x - t * ab[:, 0]
    dy = ap_y - t * ab[:, 1]
    d2 = dx * dx + dy * dy
    k = int(np.argmin(d2))
    return i0 + k, float(t[k]), float(d2[k])
