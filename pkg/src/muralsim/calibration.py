"""Camera pose recovery from four coplanar wall markers.

Planar pose estimation: a direct linear transform maps wall (u, v) to
normalized image coordinates, the homography is decomposed into an
orthonormalized rotation + translation, and a Gauss-Newton pass refines
the pose against pixel reprojection error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from muralsim.geometry import CameraModel, WallFrame


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_px: float
    principal_point: tuple[float, float]
    image_size: tuple[int, int]


def _rodrigues(w: np.ndarray) -> np.ndarray:
    """Axis-angle vector -> rotation matrix."""
    theta = float(np.linalg.norm(w))
    if theta < 1e-12:
        return np.eye(3)
    k = w / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)


def _check_configuration(marker_wall: np.ndarray) -> None:
    n = marker_wall - marker_wall.mean(axis=0)
    if np.linalg.svd(n, compute_uv=False)[-1] > 1e-6:
        raise CalibrationError("wall markers are not coplanar")
    uv = marker_wall[:, :2]
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(j + 1, 4):
                a, b, c = uv[i], uv[j], uv[k]
                area = abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0])
                if area < 1e-9:
                    raise CalibrationError(f"markers {i},{j},{k} are collinear")


def _dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Homography src (u,v) -> dst (x,y), via the left null vector of the
    stacked DLT system."""
    rows = []
    for (u, v), (x, y) in zip(src, dst):
        rows.append([u, v, 1, 0, 0, 0, -x * u, -x * v, -x])
        rows.append([0, 0, 0, u, v, 1, -y * u, -y * v, -y])
    _, _, vt = np.linalg.svd(np.array(rows))
    return vt[-1].reshape(3, 3)


def _project(focal: float, pp: np.ndarray, R_wc: np.ndarray, C: np.ndarray,
             pts: np.ndarray) -> np.ndarray:
    p_cam = (R_wc @ (pts - C).T).T
    if (p_cam[:, 2] <= 1e-9).any():
        raise CalibrationError("marker behind the candidate camera")
    return pp + focal * p_cam[:, :2] / p_cam[:, 2:3]


def calibrate_camera(marker_px, marker_wall, intrinsics: CameraIntrinsics,
                     wall: WallFrame = WallFrame(), max_iterations: int = 100) -> CameraModel:
    """Recover the camera pose from 4 marker correspondences.

    ``marker_wall`` holds wall-frame (u, v, n) points on the wall plane
    (n = 0); ``marker_px`` the detected pixel coordinates in matching
    order.  Raises :class:`CalibrationError` for degenerate marker
    configurations or non-converging refinement.
    """
    px = np.asarray(marker_px, dtype=float).reshape(4, 2)
    pw = np.asarray(marker_wall, dtype=float).reshape(4, 3)
    _check_configuration(pw)
    pp = np.asarray(intrinsics.principal_point, dtype=float)
    f = float(intrinsics.focal_px)

    norm = (px - pp) / f
    H = _dlt_homography(pw[:, :2], norm)
    scale = 2.0 / (np.linalg.norm(H[:, 0]) + np.linalg.norm(H[:, 1]))
    H = H * scale
    # points must land in front of the camera: fix the overall sign
    test = H @ np.array([*pw[0, :2], 1.0])
    if test[2] < 0:
        H = -H
    r1, r2, t = H[:, 0], H[:, 1], H[:, 2]
    R = np.column_stack([r1, r2, np.cross(r1, r2)])
    u, _, vt = np.linalg.svd(R)
    R_wc = u @ vt  # wall -> camera
    if np.linalg.det(R_wc) < 0:
        u[:, 2] *= -1
        R_wc = u @ vt
    C = -R_wc.T @ t  # camera position in wall coordinates

    # Gauss-Newton on (rotation delta, position) against pixel residuals
    def residuals(R_wc, C):
        return (_project(f, pp, R_wc, C, pw) - px).ravel()

    try:
        r = residuals(R_wc, C)
    except CalibrationError as exc:
        raise CalibrationError(f"homography gave an invalid pose: {exc}") from exc
    eps = 1e-6
    converged = False
    for _ in range(max_iterations):
        J = np.empty((8, 6))
        for k in range(6):
            d = np.zeros(6)
            d[k] = eps
            Rp = _rodrigues(d[:3]) @ R_wc
            rp = residuals(Rp, C + d[3:])
            J[:, k] = (rp - r) / eps
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        R_wc = _rodrigues(step[:3]) @ R_wc
        C = C + step[3:]
        r = residuals(R_wc, C)
        if np.linalg.norm(step) < 1e-12 or np.abs(r).max() < 1e-10:
            converged = True
            break
    if not converged and np.abs(r).max() > 0.5:
        raise CalibrationError(
            f"refinement did not converge in {max_iterations} iterations "
            f"(max residual {np.abs(r).max():.3g} px)")

    # map the wall-frame pose into the ambient world frame
    M = np.column_stack([wall.u_axis, wall.v_axis, wall.n_axis])
    return CameraModel(
        focal_px=f,
        principal_point=pp,
        position=wall.to_world(C),
        rotation=M @ R_wc.T,
        image_size=intrinsics.image_size,
    )
