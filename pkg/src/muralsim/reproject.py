"""Homography transport between the camera image and the wall plane.

Lets the operator compare painted reality against planned paths in one
coordinate system: the simulated canvas is rendered through the camera,
and any camera image is mapped back onto a wall-aligned raster.
"""

from __future__ import annotations

import numpy as np

from muralsim.geometry import CameraModel


class ReprojectError(RuntimeError):
    pass


def render_wall_to_image(wall_raster: np.ndarray, extent: tuple[float, float],
                         cam: CameraModel, out_size: tuple[int, int]) -> np.ndarray:
    """Sample a wall-plane raster through the camera (nearest neighbor).

    ``out_size`` is (width, height) of the rendered view, which is scaled
    down from the camera's native resolution but keeps its geometry.
    """
    w_out, h_out = out_size
    cam_w, cam_h = cam.image_size
    sx = cam_w / w_out
    sy = cam_h / h_out
    xs = (np.arange(w_out) + 0.5) * sx
    ys = (np.arange(h_out) + 0.5) * sy
    px, py = np.meshgrid(xs, ys)
    rays = np.stack([(px - cam.principal_point[0]) / cam.focal_px,
                     (py - cam.principal_point[1]) / cam.focal_px,
                     np.ones_like(px)], axis=-1)
    dirs = rays @ cam.rotation.T
    dn = dirs[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(dn) > 1e-12, -cam.position[2] / dn, -1.0)
    u = cam.position[0] + t * dirs[..., 0]
    v = cam.position[1] + t * dirs[..., 1]
    ny, nx = wall_raster.shape
    cell_u = extent[0] / nx
    cell_v = extent[1] / ny
    iu = np.floor(u / cell_u).astype(int)
    iv = np.floor(v / cell_v).astype(int)
    valid = (t > 0) & (iu >= 0) & (iu < nx) & (iv >= 0) & (iv < ny)
    out = np.zeros((h_out, w_out), dtype=wall_raster.dtype)
    out[valid] = wall_raster[iv[valid], iu[valid]]
    return out


def reproject_image_to_wall(image: np.ndarray, cam: CameraModel,
                            extent: tuple[float, float], cell: float,
                            image_scale: float = 1.0) -> np.ndarray:
    """Map a camera image onto the wall plane (nearest neighbor).

    ``image_scale`` relates the given image's resolution to the camera's
    native one (e.g. 0.25 for a quarter-size render).
    """
    nx = max(int(round(extent[0] / cell)), 1)
    ny = max(int(round(extent[1] / cell)), 1)
    us = (np.arange(nx) + 0.5) * cell
    vs = (np.arange(ny) + 0.5) * cell
    uu, vv = np.meshgrid(us, vs)
    pts = np.stack([uu, vv, np.zeros_like(uu)], axis=-1)
    p_cam = (pts - cam.position) @ cam.rotation  # row-vector form of R^T (p - c)
    z = p_cam[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = cam.principal_point[0] + cam.focal_px * p_cam[..., 0] / z
        py = cam.principal_point[1] + cam.focal_px * p_cam[..., 1] / z
    ix = np.floor(px * image_scale).astype(int)
    iy = np.floor(py * image_scale).astype(int)
    h, w = image.shape
    valid = (z > 1e-9) & (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.zeros((ny, nx), dtype=image.dtype)
    out[valid] = image[iy[valid], ix[valid]]
    return out


def reproject_canvas(canvas_grid: np.ndarray, extent: tuple[float, float],
                     cam: CameraModel, cell: float,
                     view_scale: float = 0.25) -> np.ndarray:
    """Full operator round trip: canvas -> camera view -> wall overlay."""
    w_out = max(int(cam.image_size[0] * view_scale), 1)
    h_out = max(int(cam.image_size[1] * view_scale), 1)
    view = render_wall_to_image(canvas_grid, extent, cam, (w_out, h_out))
    scale = w_out / cam.image_size[0]
    return reproject_image_to_wall(view, cam, extent, cell, image_scale=scale)


def mask_offset(overlay: np.ndarray, reference: np.ndarray,
                cell: float) -> tuple[float, float]:
    """Centroid displacement (du, dv) in meters between two masks;
    measures operator-visible misalignment of painted vs planned."""
    if overlay.sum() == 0 or reference.sum() == 0:
        raise ReprojectError("cannot measure offset of an empty mask")
    oy, ox = np.nonzero(overlay)
    ry, rx = np.nonzero(reference)
    du = (ox.mean() - rx.mean()) * cell
    dv = (oy.mean() - ry.mean()) * cell
    return float(du), float(dv)
