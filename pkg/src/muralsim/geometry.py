"""Wall coordinate frame, pinhole camera model and localization beams.

Conventions used throughout the package:

* The wall frame is the global mission frame.  Coordinates are written
  ``(u, v, n)``: ``u`` horizontal along the wall, ``v`` vertical up,
  ``n`` normal pointing away from the wall into the flight volume.
  "Distance to the wall" is simply the ``n`` coordinate.
* Cameras follow the usual computer-vision convention: ``x`` right,
  ``y`` down, ``z`` forward along the optical axis.  Pixel ``y`` grows
  downward.
* The pinhole model is distortion free; synthetic sensors are generated
  with the same model, so the two sides agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_UNIT_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate geometric configurations."""


def _as_vec(x, dim: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape != (dim,):
        raise ValueError(f"expected a {dim}-vector, got shape {a.shape}")
    return a


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm < _UNIT_TOL:
        raise GeometryError("cannot normalize a near-zero vector")
    return v / norm


@dataclass(frozen=True)
class WallFrame:
    """Orthonormal wall frame embedded in the ambient world frame."""

    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    u_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))
    v_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    n_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        o = _as_vec(self.origin, 3)
        u = _as_vec(self.u_axis, 3)
        v = _as_vec(self.v_axis, 3)
        n = _as_vec(self.n_axis, 3)
        for name, a in (("u_axis", u), ("v_axis", v), ("n_axis", n)):
            if abs(np.linalg.norm(a) - 1.0) > _UNIT_TOL:
                raise GeometryError(f"{name} is not a unit vector")
        if abs(u @ v) > _UNIT_TOL or abs(u @ n) > _UNIT_TOL or abs(v @ n) > _UNIT_TOL:
            raise GeometryError("wall frame axes are not mutually orthogonal")
        if np.linalg.norm(np.cross(u, v) - n) > 1e-8:
            raise GeometryError("n_axis must equal u_axis x v_axis")
        for attr, a in (("origin", o), ("u_axis", u), ("v_axis", v), ("n_axis", n)):
            a.setflags(write=False)
            object.__setattr__(self, attr, a)

    def to_wall(self, p_world) -> np.ndarray:
        """World point -> (u, v, n) wall coordinates."""
        d = _as_vec(p_world, 3) - self.origin
        return np.array([d @ self.u_axis, d @ self.v_axis, d @ self.n_axis])

    def to_world(self, p_wall) -> np.ndarray:
        """(u, v, n) wall coordinates -> world point."""
        u, v, n = _as_vec(p_wall, 3)
        return self.origin + u * self.u_axis + v * self.v_axis + n * self.n_axis


@dataclass(frozen=True)
class Beam:
    """Half-line from a camera center through a detected image point."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = _as_vec(self.origin, 3)
        d = _as_vec(self.direction, 3)
        if abs(np.linalg.norm(d) - 1.0) > _UNIT_TOL:
            d = normalize(d)
        o.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def point_at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with square pixels and zero distortion.

    ``rotation`` maps camera-frame vectors into the world frame (columns
    are the camera axes expressed in world coordinates).
    """

    focal_px: float
    principal_point: np.ndarray
    position: np.ndarray
    rotation: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self):
        if self.focal_px <= 0:
            raise GeometryError("focal length must be positive")
        pp = _as_vec(self.principal_point, 2)
        w, h = self.image_size
        if not (0 <= pp[0] <= w and 0 <= pp[1] <= h):
            raise GeometryError("principal point outside image bounds")
        pos = _as_vec(self.position, 3)
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3):
            raise GeometryError("rotation must be 3x3")
        if np.linalg.norm(R @ R.T - np.eye(3)) > 1e-6 or np.linalg.det(R) < 0:
            raise GeometryError("rotation is not a proper rotation matrix")
        for attr, a in (("principal_point", pp), ("position", pos), ("rotation", R)):
            a.setflags(write=False)
            object.__setattr__(self, attr, a)
        object.__setattr__(self, "image_size", (int(w), int(h)))

    def in_bounds(self, px) -> bool:
        x, y = px
        w, h = self.image_size
        return 0 <= x <= w and 0 <= y <= h

    def project(self, p_world) -> np.ndarray:
        """Project a world point to pixel coordinates.

        Raises :class:`GeometryError` for points at or behind the camera
        plane; callers decide whether out-of-frame pixels matter.
        """
        p_cam = self.rotation.T @ (_as_vec(p_world, 3) - self.position)
        if p_cam[2] <= 1e-9:
            raise GeometryError("point is behind the camera")
        return self.principal_point + self.focal_px * p_cam[:2] / p_cam[2]

    def project_visible(self, p_world) -> np.ndarray | None:
        """Like :meth:`project` but returns None when behind or out of frame."""
        try:
            px = self.project(p_world)
        except GeometryError:
            return None
        return px if self.in_bounds(px) else None


def look_at(position, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Camera-to-world rotation with the optical axis aimed at ``target``.

    ``up`` is the world direction that should map near the image "up"
    (negative pixel y).
    """
    z = normalize(np.asarray(target, dtype=float) - np.asarray(position, dtype=float))
    up = np.asarray(up, dtype=float)
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-9:
        raise GeometryError("camera up direction is parallel to the optical axis")
    x = normalize(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def beam_from_pixel(cam: CameraModel, px) -> Beam:
    """Beam through the camera center and an image point."""
    px = _as_vec(px, 2)
    if not cam.in_bounds(px):
        raise GeometryError(f"pixel {px.tolist()} outside image bounds {cam.image_size}")
    ray_cam = np.array(
        [
            (px[0] - cam.principal_point[0]) / cam.focal_px,
            (px[1] - cam.principal_point[1]) / cam.focal_px,
            1.0,
        ]
    )
    return Beam(origin=cam.position, direction=normalize(cam.rotation @ ray_cam))


def intersect_beam_at_wall_distance(beam: Beam, wall: WallFrame, d: float) -> np.ndarray:
    """Point on ``beam`` whose wall-normal coordinate equals ``d``.

    Solves the plane ``(P - wall.origin) . n = d`` for the beam parameter.
    ``t = 0`` (beam origin already at distance ``d``) is accepted;
    negative ``t`` or a grazing beam is an error.
    """
    denom = float(beam.direction @ wall.n_axis)
    if abs(denom) < 1e-6:
        raise GeometryError("beam is parallel to the wall offset plane")
    t = (d - float((beam.origin - wall.origin) @ wall.n_axis)) / denom
    if t < 0:
        raise GeometryError(f"intersection behind the beam origin (t={t:.3g})")
    return beam.point_at(t)
