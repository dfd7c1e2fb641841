# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementations of the simulation hot kernels.

Semantics match ``_fallback.py`` one-for-one; see the docstrings there.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, floor, ceil

cnp.import_array()

BACKEND = "cython"


def splat_gaussian(double[:, ::1] grid, double cu, double cv, double su,
                   double sv, double mass, double cell, double extent=4.0):
    cdef Py_ssize_t ny = grid.shape[0]
    cdef Py_ssize_t nx = grid.shape[1]
    cdef long ju0 = <long>floor((cu - extent * su) / cell - 0.5)
    cdef long ju1 = <long>ceil((cu + extent * su) / cell - 0.5)
    cdef long jv0 = <long>floor((cv - extent * sv) / cell - 0.5)
    cdef long jv1 = <long>ceil((cv + extent * sv) / cell - 0.5)

    cdef Py_ssize_t wu = ju1 - ju0 + 1
    cdef Py_ssize_t wv = jv1 - jv0 + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wx = np.empty(wu, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wy = np.empty(wv, dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double x, y, r, sum_x = 0.0, sum_y = 0.0

    for i in range(wu):
        x = ((ju0 + i) + 0.5) * cell
        r = (x - cu) / su
        wx[i] = exp(-0.5 * r * r)
        sum_x += wx[i]
    for j in range(wv):
        y = ((jv0 + j) + 0.5) * cell
        r = (y - cv) / sv
        wy[j] = exp(-0.5 * r * r)
        sum_y += wy[j]
    cdef double total = sum_y * sum_x
    if total <= 0.0:
        return 0.0

    cdef long iu0 = ju0, iu1 = ju1, iv0 = jv0, iv1 = jv1
    if iu0 < 0:
        iu0 = 0
    if iu1 > nx - 1:
        iu1 = nx - 1
    if iv0 < 0:
        iv0 = 0
    if iv1 > ny - 1:
        iv1 = ny - 1
    if iu0 > iu1 or iv0 > iv1:
        return 0.0

    cdef double scale = mass / total
    cdef double w, deposited_w = 0.0
    for j in range(iv0, iv1 + 1):
        for i in range(iu0, iu1 + 1):
            w = wy[j - jv0] * wx[i - ju0]
            grid[j, i] += scale * w
            deposited_w += w
    return mass * deposited_w / total


def ransac_consensus(double[:, ::1] xy, long[:, ::1] pairs, double tol):
    cdef Py_ssize_t n = xy.shape[0]
    cdef Py_ssize_t k = pairs.shape[0]
    cdef Py_ssize_t best_k = 0, i, j
    cdef long best_count = 0, count
    cdef double px, py, qx, qy, dx, dy, norm, nx, ny, res

    for i in range(k):
        px = xy[pairs[i, 0], 0]
        py = xy[pairs[i, 0], 1]
        qx = xy[pairs[i, 1], 0]
        qy = xy[pairs[i, 1], 1]
        dx = qx - px
        dy = qy - py
        norm = sqrt(dx * dx + dy * dy)
        if norm <= 1e-12:
            continue
        nx = -dy / norm
        ny = dx / norm
        count = 0
        for j in range(n):
            res = fabs((xy[j, 0] - px) * nx + (xy[j, 1] - py) * ny)
            if res <= tol:
                count += 1
        if count > best_count:
            best_count = count
            best_k = i
    return best_k, best_count


def line_inliers(double[:, ::1] xy, double px, double py, double qx,
                 double qy, double tol):
    cdef Py_ssize_t n = xy.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1, cast=True] out = np.zeros(n, dtype=bool)
    cdef double dx = qx - px
    cdef double dy = qy - py
    cdef double norm = sqrt(dx * dx + dy * dy)
    cdef double nx, ny, res
    cdef Py_ssize_t j
    if norm < 1e-12:
        return out
    nx = -dy / norm
    ny = dx / norm
    for j in range(n):
        res = fabs((xy[j, 0] - px) * nx + (xy[j, 1] - py) * ny)
        if res <= tol:
            out[j] = True
    return out


def project_polyline(double[:, ::1] pts, double px, double py,
                     Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t k, best_k = i0
    cdef double ax, ay, bx, by, abx, aby, apx, apy, len2, t, dx, dy, d2
    cdef double best_t = 0.0, best_d2 = -1.0

    for k in range(i0, i1):
        ax = pts[k, 0]
        ay = pts[k, 1]
        bx = pts[k + 1, 0]
        by = pts[k + 1, 1]
        abx = bx - ax
        aby = by - ay
        apx = px - ax
        apy = py - ay
        len2 = abx * abx + aby * aby
        if len2 > 0.0:
            t = (apx * abx + apy * aby) / len2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
        else:
            t = 0.0
        dx = apx - t * abx
        dy = apy - t * aby
        d2 = dx * dx + dy * dy
        if best_d2 < 0.0 or d2 < best_d2:
            best_d2 = d2
            best_k = k
            best_t = t
    return best_k, best_t, best_d2
