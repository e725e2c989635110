"""Spherical camera parameterization, look-at poses and per-pixel rays.

Conventions (pinned for the whole pipeline):

- World frame is right-handed with +z up.
- A viewpoint is (theta, phi, gamma): azimuth in degrees, elevation in
  degrees above the equatorial plane, and the observation radius.
- Camera frame follows the OpenCV convention: +x right, +y down,
  +z forward.  The rotation stored in a pose maps camera coordinates to
  world coordinates (columns are the camera axes expressed in world
  coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ORTHONORMAL_TOL = 1e-9


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Viewpoint:
    """Spherical camera position (theta, phi, gamma).

    theta is normalized into [0, 360) on construction.  phi must lie in
    [0, 90] (degrees above the equator) and gamma must be positive.
    """

    theta: float
    phi: float
    gamma: float

    def __post_init__(self) -> None:
        theta = float(self.theta) % 360.0
        if theta == 360.0:  # guards -1e-13 % 360 -> 360.0
            theta = 0.0
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "gamma", float(self.gamma))
        if not math.isfinite(self.phi) or not (0.0 <= self.phi <= 90.0):
            raise ValueError(f"phi must be in [0, 90] degrees, got {self.phi}")
        if not math.isfinite(self.gamma) or self.gamma <= 0.0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


@dataclass(frozen=True)
class CameraPose:
    """Pinhole camera pose: position, camera-to-world rotation, intrinsics."""

    position: np.ndarray
    rotation: np.ndarray
    focal: float
    width: int
    height: int

    def __post_init__(self) -> None:
        position = _as_readonly(self.position)
        rotation = _as_readonly(self.rotation)
        if position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if rotation.shape != (3, 3):
            raise ValueError("rotation must be a 3x3 matrix")
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=ORTHONORMAL_TOL):
            raise ValueError("rotation columns are not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1")
        if self.focal <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("intrinsics must be positive")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "rotation", rotation)

    @property
    def right(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def down(self) -> np.ndarray:
        return self.rotation[:, 1]

    @property
    def forward(self) -> np.ndarray:
        return self.rotation[:, 2]


@dataclass(frozen=True)
class Ray:
    """A single ray with unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self) -> None:
        origin = _as_readonly(self.origin)
        direction = _as_readonly(self.direction)
        if origin.shape != (3,) or direction.shape != (3,):
            raise ValueError("origin and direction must be 3-vectors")
        if abs(np.linalg.norm(direction) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("direction must be unit length")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)


def pose_from_viewpoint(
    v: Viewpoint,
    focal: float = 64.0,
    width: int = 64,
    height: int = 64,
) -> CameraPose:
    """Build the roll-free look-at pose for a viewpoint on the sphere.

    The camera sits at gamma * (cos(phi)cos(theta), cos(phi)sin(theta),
    sin(phi)) and looks at the origin.  The up reference is world +z; at
    the phi = 90 pole, where +z is parallel to the view direction, the
    reference falls back to world +x.
    """
    t = math.radians(v.theta)
    p = math.radians(v.phi)
    position = v.gamma * np.array(
        [math.cos(p) * math.cos(t), math.cos(p) * math.sin(t), math.sin(p)]
    )
    forward = -position / np.linalg.norm(position)

    up_ref = np.array([0.0, 0.0, 1.0])
    if np.linalg.norm(np.cross(forward, up_ref)) < 1e-12:
        up_ref = np.array([1.0, 0.0, 0.0])
    right = np.cross(forward, up_ref)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)

    rotation = np.stack([right, down, forward], axis=1)
    return CameraPose(position, rotation, focal=focal, width=width, height=height)


def rays_for_pose(p: CameraPose) -> tuple[np.ndarray, np.ndarray]:
    """Generate one ray per pixel.

    Returns (origins, directions), both shaped (height, width, 3) with
    unit directions.  Pixel (i, j) maps to camera-frame direction
    ((j - W/2) / focal, (i - H/2) / focal, 1), so for even image sizes
    the pixel at (H/2, W/2) lies exactly on the optical axis.
    """
    j = np.arange(p.width, dtype=np.float64)
    i = np.arange(p.height, dtype=np.float64)
    jj, ii = np.meshgrid(j, i)
    dirs_cam = np.stack(
        [
            (jj - p.width / 2.0) / p.focal,
            (ii - p.height / 2.0) / p.focal,
            np.ones_like(jj),
        ],
        axis=-1,
    )
    dirs = dirs_cam @ p.rotation.T
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    origins = np.broadcast_to(p.position, dirs.shape).copy()
    return origins, dirs
