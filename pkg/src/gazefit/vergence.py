"""Binocular gaze geometry: gaze vectors and the closest point of two rays.

Both gaze rays live in the camera frame. The vergence target is the midpoint
of the shortest segment ``K_l K_r`` joining the two lines, found by solving

    [g_l | -g_r | g_r x g_l] (k_l, k_r, k_lr)^T = o_r - o_l

with an explicit 3x3 inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gazefit import ad
from gazefit.model import rodrigues

PARALLEL_EPS = 1e-8


class ParallelGaze(ValueError):
    """The two gaze directions are (numerically) parallel."""


@dataclass(frozen=True)
class GazeAngles:
    elevation: float
    azimuth: float

    def __post_init__(self):
        if not (np.isfinite(ad.value(self.elevation)) and np.isfinite(ad.value(self.azimuth))):
            raise ValueError("gaze angles must be finite")


@dataclass(frozen=True)
class GazeRay:
    origin: object
    direction: object

    def __post_init__(self):
        n = float(np.linalg.norm(ad.value(self.direction)))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"gaze direction must be unit length, got norm {n}")


@dataclass(frozen=True)
class VergenceSolution:
    K_l: object
    K_r: object
    t_hat: object
    d: object
    k_l: object
    k_r: object
    k_lr: object
    parallel: bool = False

    @property
    def diverging_flags(self) -> tuple:
        """Per-eye flag: the shortest segment lies at or behind that eye."""
        return (bool(ad.value(self.k_l) <= 0), bool(ad.value(self.k_r) <= 0))

    @property
    def gap(self):
        """``K_l - K_r``; its squared norm is the skew loss."""
        return self.K_l - self.K_r


def gaze_vector(elevation, azimuth):
    """``R_y(azimuth) R_x(elevation) (0, 0, 1)``.

    Equals ``(sin a cos e, -sin e, cos a cos e)``.
    """
    ce = ad.cos(elevation)
    return ad.stack([ad.sin(azimuth) * ce, -ad.sin(elevation), ad.cos(azimuth) * ce])


def gaze_rotation(elevation: float, azimuth: float) -> np.ndarray:
    """The eyeball rotation whose third column is :func:`gaze_vector`."""
    return rodrigues([0.0, azimuth, 0.0]) @ rodrigues([elevation, 0.0, 0.0])


def gaze_angles(direction) -> GazeAngles:
    """Inverse of :func:`gaze_vector` for directions with positive z."""
    g = np.asarray(direction, dtype=float)
    g = g / np.linalg.norm(g)
    return GazeAngles(elevation=float(-np.arcsin(np.clip(g[1], -1.0, 1.0))), azimuth=float(np.arctan2(g[0], g[2])))


def solve_vergence(ray_l: GazeRay, ray_r: GazeRay, eps: float = PARALLEL_EPS) -> VergenceSolution:
    g_l, g_r = ray_l.direction, ray_r.direction
    n = ad.cross(g_r, g_l)
    det = ad.dot(n, n)  # determinant of [g_l | -g_r | n]
    if not float(np.sqrt(ad.value(det))) > eps:
        raise ParallelGaze(f"|g_r x g_l| = {float(np.sqrt(ad.value(det))):.3g} <= {eps}")
    rhs = ray_r.origin - ray_l.origin
    neg_r = -g_r
    # rows of the inverse of a matrix with columns (a, b, c): b x c, c x a, a x b over det
    k_l = ad.dot(ad.cross(neg_r, n), rhs) / det
    k_r = ad.dot(ad.cross(n, g_l), rhs) / det
    k_lr = ad.dot(n, rhs) / det
    K_l = ray_l.origin + g_l * k_l
    K_r = ray_r.origin + g_r * k_r
    gap = K_l - K_r
    return VergenceSolution(
        K_l=K_l, K_r=K_r, t_hat=(K_l + K_r) * 0.5, d=ad.norm(gap), k_l=k_l, k_r=k_r, k_lr=k_lr
    )


def parallel_offset(ray_l: GazeRay, ray_r: GazeRay):
    """Component of ``o_r - o_l`` perpendicular to the left direction."""
    w = ray_r.origin - ray_l.origin
    g = ray_l.direction
    return w - g * ad.dot(w, g)


def skew_distance_parallel(ray_l: GazeRay, ray_r: GazeRay) -> float:
    return float(np.linalg.norm(ad.value(parallel_offset(ray_l, ray_r))))


def parallel_solution(ray_l: GazeRay, ray_r: GazeRay) -> VergenceSolution:
    """Degenerate stand-in for parallel rays.

    ``K_l`` is the left origin and ``K_r`` its foot point on the right line, so
    ``d`` is the distance between the two parallel lines.
    """
    w = ray_r.origin - ray_l.origin
    s = ad.dot(w, ray_l.direction)
    K_l = ray_l.origin
    K_r = ray_r.origin - ray_l.direction * s
    gap = K_l - K_r
    return VergenceSolution(
        K_l=K_l, K_r=K_r, t_hat=(K_l + K_r) * 0.5, d=ad.norm(gap),
        k_l=0.0 * s, k_r=-s, k_lr=0.0 * s, parallel=True,
    )


def vergence(ray_l: GazeRay, ray_r: GazeRay, eps: float = PARALLEL_EPS) -> VergenceSolution:
    """:func:`solve_vergence`, falling back to :func:`parallel_solution`."""
    try:
        return solve_vergence(ray_l, ray_r, eps)
    except ParallelGaze:
        return parallel_solution(ray_l, ray_r)


def brute_force_vergence(ray_l: GazeRay, ray_r: GazeRay, span: float = 10.0, steps: int = 81):
    """Test oracle: grid search over ``(k_l, k_r)`` plus Newton refinement.

    Minimises the squared segment length ``|o_l + k_l g_l - o_r - k_r g_r|^2``
    directly in the two line parameters. Returns ``(t_hat, d)``.
    """
    o_l, g_l = np.asarray(ray_l.origin, float), np.asarray(ray_l.direction, float)
    o_r, g_r = np.asarray(ray_r.origin, float), np.asarray(ray_r.direction, float)
    ks = np.linspace(-span, span, steps)
    A = o_l[None, None, :] + ks[:, None, None] * g_l
    B = o_r[None, None, :] + ks[None, :, None] * g_r
    i, j = np.unravel_index(np.argmin(((A - B) ** 2).sum(axis=-1)), (steps, steps))
    k = np.array([ks[i], ks[j]])
    hess = np.array([[g_l @ g_l, -(g_l @ g_r)], [-(g_l @ g_r), g_r @ g_r]])
    for _ in range(4):
        diff = (o_l + k[0] * g_l) - (o_r + k[1] * g_r)
        k = k - np.linalg.solve(hess, np.array([diff @ g_l, -(diff @ g_r)]))
    K_l, K_r = o_l + k[0] * g_l, o_r + k[1] * g_r
    return 0.5 * (K_l + K_r), float(np.linalg.norm(K_l - K_r))
