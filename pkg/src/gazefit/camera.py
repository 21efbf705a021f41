"""Pinhole projection and the angular gaze error metric."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from gazefit import ad
from gazefit.model import EyeRegionMesh, LinearBasis

DEPTH_EPS = 1e-6


class DepthNonPositive(ValueError):
    """A point sits at or behind the camera plane."""

    def __init__(self, message, landmark=None):
        super().__init__(message)
        self.landmark = landmark


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image size must be positive")

    @classmethod
    def default(cls) -> "CameraIntrinsics":
        return cls(fx=600.0, fy=600.0, cx=320.0, cy=240.0, width=640, height=480)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(**{k: d[k] for k in ("fx", "fy", "cx", "cy", "width", "height")})


def project_points(cam: CameraIntrinsics, points, eps: float = DEPTH_EPS):
    """Project ``(..., 3)`` camera-frame points to pixels (no clipping)."""
    z = points[..., 2]
    bad = np.atleast_1d(ad.value(z) <= eps)
    if bad.any():
        raise DepthNonPositive(f"point at or behind the camera (index {int(np.argmax(bad))})")
    inv_z = 1.0 / z
    u = points[..., 0] * inv_z * cam.fx + cam.cx
    v = points[..., 1] * inv_z * cam.fy + cam.cy
    return ad.stack([u, v], axis=-1)


def project(cam: CameraIntrinsics, p, eps: float = DEPTH_EPS):
    if np.shape(ad.value(p)) != (3,):
        raise ValueError("project expects a single 3-vector")
    return project_points(cam, p, eps)


def project_landmarks(cam: CameraIntrinsics, mesh: EyeRegionMesh, basis: LinearBasis, eps: float = DEPTH_EPS):
    """31 x 2 pixel positions of the landmark vertices."""
    if mesh.frame != "camera":
        raise ValueError("project_landmarks expects a camera-frame mesh")
    pts = mesh.vertices[basis.landmark_indices]
    depth = ad.value(pts)[:, 2]
    behind = np.flatnonzero(depth <= eps)
    if behind.size:
        i = int(behind[0])
        raise DepthNonPositive(
            f"landmark {i} (vertex {int(basis.landmark_indices[i])}) has depth {depth[i]:.3g} m", landmark=i
        )
    return project_points(cam, pts, eps)


def angular_error(g_hat, g_gt) -> float:
    """Angle in degrees between two (not necessarily unit) vectors.

    Equal to ``arccos`` of the clamped normalised dot product; evaluated as
    ``atan2(|a x b|, a . b)`` so that parallel inputs give exactly 0.
    """
    a = np.asarray(g_hat, dtype=float)
    b = np.asarray(g_gt, dtype=float)
    if np.linalg.norm(a) == 0.0 or np.linalg.norm(b) == 0.0:
        raise ValueError("zero-length gaze vector")
    return float(np.degrees(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b))))
