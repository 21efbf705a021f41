"""Linear eye-region morphable model: reconstruction, posing and eyeballs.

Vertices use a column-vector convention, ``v' = f R v + T``. This is the
transpose of the row form ``S' = f S R^T + 1 T`` and describes the same map.
All reconstruction and posing functions accept :class:`gazefit.ad.Jet`
coefficients, so the fitter can push derivatives through them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from gazefit import ad

N_LANDMARKS = 31
SMALL_ANGLE = 1e-8
ROTATION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LinearBasis:
    """Mean mesh, principal components and vertex bookkeeping."""

    mean_shape: np.ndarray  # (N, 3) metres, model frame
    shape_components: np.ndarray  # (K_S, N, 3)
    mean_color: np.ndarray  # (N, 3) in [0, 1]
    color_components: np.ndarray  # (K_A, N, 3)
    faces: np.ndarray  # (F, 3) vertex indices
    landmark_indices: np.ndarray  # (31,)
    left_eyeball_indices: np.ndarray
    right_eyeball_indices: np.ndarray
    left_eye_outer_corner: int
    right_eye_outer_corner: int

    def __post_init__(self):
        arrays = {
            "mean_shape": np.asarray(self.mean_shape, dtype=float),
            "shape_components": np.asarray(self.shape_components, dtype=float),
            "mean_color": np.asarray(self.mean_color, dtype=float),
            "color_components": np.asarray(self.color_components, dtype=float),
            "faces": np.asarray(self.faces, dtype=np.int64).reshape(-1, 3),
            "landmark_indices": np.asarray(self.landmark_indices, dtype=np.int64),
            "left_eyeball_indices": np.asarray(self.left_eyeball_indices, dtype=np.int64),
            "right_eyeball_indices": np.asarray(self.right_eyeball_indices, dtype=np.int64),
        }
        n = arrays["mean_shape"].shape[0]
        if arrays["mean_shape"].shape != (n, 3):
            raise ValueError("mean_shape must be N x 3")
        for name in ("shape_components", "color_components"):
            comp = arrays[name]
            if comp.size == 0:
                comp = comp.reshape(0, n, 3)
                arrays[name] = comp
            if comp.ndim != 3 or comp.shape[1:] != (n, 3):
                raise ValueError(f"{name} must be K x {n} x 3, got {comp.shape}")
        if arrays["mean_color"].shape != (n, 3):
            raise ValueError("mean_color must be N x 3")
        if arrays["landmark_indices"].shape != (N_LANDMARKS,):
            raise ValueError(f"expected {N_LANDMARKS} landmark indices")
        for name in ("faces", "landmark_indices", "left_eyeball_indices", "right_eyeball_indices"):
            idx = arrays[name]
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"{name} out of range [0, {n})")
        for corner in (self.left_eye_outer_corner, self.right_eye_outer_corner):
            if not 0 <= int(corner) < n:
                raise ValueError("outer eye corner index out of range")
        if np.intersect1d(arrays["left_eyeball_indices"], arrays["right_eyeball_indices"]).size:
            raise ValueError("eyeball index sets overlap")
        for name, arr in arrays.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "left_eye_outer_corner", int(self.left_eye_outer_corner))
        object.__setattr__(self, "right_eye_outer_corner", int(self.right_eye_outer_corner))

    @property
    def n_vertices(self) -> int:
        return self.mean_shape.shape[0]

    @property
    def n_shape(self) -> int:
        return self.shape_components.shape[0]

    @property
    def n_color(self) -> int:
        return self.color_components.shape[0]

    def equals(self, other: "LinearBasis") -> bool:
        """Structural equality on every array and index."""
        names = (
            "mean_shape", "shape_components", "mean_color", "color_components", "faces",
            "landmark_indices", "left_eyeball_indices", "right_eyeball_indices",
        )
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names) and (
            self.left_eye_outer_corner == other.left_eye_outer_corner
            and self.right_eye_outer_corner == other.right_eye_outer_corner
        )


@dataclass(frozen=True)
class PoseParams:
    r: object  # axis-angle, radians
    T: object  # translation, metres
    f: object = 1.0  # scale

    def __post_init__(self):
        if not np.all(np.isfinite(ad.value(self.r))):
            raise ValueError("rotation must be finite")
        if not float(ad.value(self.f)) > 0:
            raise ValueError(f"scale f must be positive, got {float(ad.value(self.f))}")


@dataclass(frozen=True)
class EyeRegionMesh:
    vertices: object  # (N, 3) array or Jet
    colors: np.ndarray | None = None
    frame: str = "model"

    def __post_init__(self):
        if self.frame not in ("model", "camera"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if not np.all(np.isfinite(ad.value(self.vertices))):
            raise ValueError("mesh vertices must be finite")


def reconstruct_shape(basis: LinearBasis, z_shape) -> EyeRegionMesh:
    """Mean shape plus the weighted shape components."""
    if np.shape(ad.value(z_shape)) != (basis.n_shape,):
        raise ValueError(f"expected {basis.n_shape} shape coefficients, got {np.shape(ad.value(z_shape))}")
    vertices = ad.combine_modes(z_shape, basis.shape_components) + basis.mean_shape
    return EyeRegionMesh(vertices, frame="model")


def reconstruct_color(basis: LinearBasis, z_color, clamp: bool = False) -> np.ndarray:
    """Per-vertex colours. ``clamp`` is meant for export only."""
    z_color = np.asarray(z_color, dtype=float)
    if z_color.shape != (basis.n_color,):
        raise ValueError(f"expected {basis.n_color} color coefficients, got {z_color.shape}")
    colors = basis.mean_color + np.tensordot(z_color, basis.color_components, axes=1)
    return np.clip(colors, 0.0, 1.0) if clamp else colors


def skew(v):
    zero = 0.0
    return ad.stack(
        [
            ad.stack([zero, -v[2], v[1]]),
            ad.stack([v[2], zero, -v[0]]),
            ad.stack([-v[1], v[0], zero]),
        ]
    )


def rodrigues(r):
    """Rotation matrix for the axis-angle vector ``r``.

    Uses ``R = I + a K + b K^2`` with ``K = [r]_x``, ``a = sin(t)/t`` and
    ``b = (1 - cos t)/t^2``; below ``t < 1e-8`` the two-term series is used.
    """
    if not isinstance(r, ad.Jet):
        r = np.asarray(r, dtype=float)
    if np.shape(ad.value(r)) != (3,):
        raise ValueError("axis-angle vector must have 3 entries")
    theta2 = ad.dot(r, r)
    if float(ad.value(theta2)) < SMALL_ANGLE**2:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        theta = ad.sqrt(theta2)
        half = ad.sin(theta * 0.5)
        a = ad.sin(theta) / theta
        # 2 sin^2(t/2) avoids the cancellation in 1 - cos t
        b = 2.0 * half * half / theta2
    K = skew(r)
    return a * K + b * ad.matmul(K, K) + np.eye(3)


def apply_pose(mesh: EyeRegionMesh, pose: PoseParams) -> EyeRegionMesh:
    """Similarity transform ``v -> f R v + T`` into the camera frame."""
    if mesh.frame != "model":
        raise ValueError("apply_pose expects a model-frame mesh")
    R = rodrigues(pose.r)
    rotated = ad.matmul(mesh.vertices, R.T)
    vertices = rotated * pose.f + pose.T
    return EyeRegionMesh(vertices, mesh.colors, frame="camera")


def _centroid(vertices, indices):
    if len(indices) == 0:
        raise ValueError("empty eyeball index set")
    return ad.mean(vertices[indices], axis=0)


def eyeball_centres(mesh: EyeRegionMesh, basis: LinearBasis):
    """Centroids of the left and right eyeball vertex sets."""
    return (
        _centroid(mesh.vertices, basis.left_eyeball_indices),
        _centroid(mesh.vertices, basis.right_eyeball_indices),
    )


def check_rotation(R, tol: float = ROTATION_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError("rotation must be 3 x 3")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix is not a rotation")
    return R


def rotate_eyeballs(mesh: EyeRegionMesh, basis: LinearBasis, R_left, R_right) -> EyeRegionMesh:
    """Rotate each eyeball about its own centroid; other vertices untouched."""
    R_left, R_right = check_rotation(R_left), check_rotation(R_right)
    vertices = np.array(ad.value(mesh.vertices), dtype=float)
    for idx, R in ((basis.left_eyeball_indices, R_left), (basis.right_eyeball_indices, R_right)):
        centre = _centroid(vertices, idx)
        vertices[idx] = centre + (vertices[idx] - centre) @ R.T
    return EyeRegionMesh(vertices, mesh.colors, frame=mesh.frame)


# ---------------------------------------------------------------------------
# Procedural basis


@dataclass(frozen=True)
class SyntheticBasisConfig:
    n_shape: int = 8
    n_color: int = 4
    eyeball_rings: int = 5
    eyeball_segments: int = 8
    eyeball_radius: float = 0.012
    interocular: float = 0.063
    grid_spacing: float = 0.008
    interocular_sigma: float = 0.003  # change of full interocular distance per unit
    radius_sigma: float = 0.0006
    deform_sigma: float = 0.002
    color_sigma: float = 0.05
    landmark_clearance: float = 0.0035
    extent: tuple = field(default=(-0.064, 0.064, -0.040, 0.056))  # x0, x1, y0, y1

    def validate(self):
        if self.n_shape < 2:
            raise ValueError("need at least 2 shape components (interocular and radius modes)")
        if self.n_color < 0:
            raise ValueError("n_color must be non-negative")
        if self.eyeball_rings * self.eyeball_segments + 2 < 16:
            raise ValueError("need at least 16 vertices per eyeball")
        if self.eyeball_rings < 1 or self.eyeball_segments < 3:
            raise ValueError("eyeball tessellation too coarse")
        if self.grid_spacing <= 0 or self.eyeball_radius <= 0:
            raise ValueError("grid spacing and eyeball radius must be positive")


def _uv_sphere(rings: int, segments: int, radius: float):
    """Unit-pole-on-+z sphere; rings are symmetric about the equator."""
    pts = [(0.0, 0.0, radius)]
    for i in range(1, rings + 1):
        polar = np.pi * i / (rings + 1)
        for j in range(segments):
            az = 2.0 * np.pi * j / segments
            pts.append((radius * np.sin(polar) * np.cos(az), radius * np.sin(polar) * np.sin(az), radius * np.cos(polar)))
    pts.append((0.0, 0.0, -radius))
    faces = []
    last = len(pts) - 1
    for j in range(segments):
        faces.append((0, 1 + j, 1 + (j + 1) % segments))
    for i in range(rings - 1):
        a0, b0 = 1 + i * segments, 1 + (i + 1) * segments
        for j in range(segments):
            j1 = (j + 1) % segments
            faces.append((a0 + j, b0 + j, b0 + j1))
            faces.append((a0 + j, b0 + j1, a0 + j1))
    base = 1 + (rings - 1) * segments
    for j in range(segments):
        faces.append((base + j, last, base + (j + 1) % segments))
    return np.array(pts), np.array(faces, dtype=np.int64)


def _face_height(x, y):
    """Depth of the brow/nose surface in front of the eyeball plane (+z)."""
    brow = 0.006 * np.exp(-(((y + 0.024) / 0.009) ** 2)) * np.exp(-((np.abs(x) / 0.07) ** 6))
    ridge = np.clip((y + 0.012) / 0.05, 0.0, 1.0)
    nose = 0.024 * ridge * np.exp(-((x / 0.010) ** 2))
    return 0.012 + brow + nose


def _landmark_layout(interocular: float):
    """2-D positions of 22 eye-region and 9 nose landmarks (y points down).

    The subject's left side is -x. Returns the points plus the positions of
    the left and right outer eye corners within the list.
    """
    half = interocular / 2.0
    pts = []
    for side in (-1.0, 1.0):  # brows, 5 each, inner to outer
        for i in range(5):
            x = side * (0.010 + 0.011 * i)
            y = -0.021 - 0.005 * np.sin(np.pi * (i + 0.5) / 5.0)
            pts.append((x, y))
    corners = {}
    for side in (-1.0, 1.0):  # eye contours, 6 each
        cx = side * half
        for k in range(6):
            ang = np.pi * k / 3.0
            pts.append((cx + side * 0.014 * np.cos(ang), 0.005 * np.sin(ang)))
            if k == 0:
                corners[side] = len(pts) - 1
    for y in (-0.004, 0.008, 0.020, 0.032):  # nose ridge
        pts.append((0.0, y))
    for x in (-0.016, -0.008, 0.0, 0.008, 0.016):  # nose base
        pts.append((x, 0.044))
    return np.array(pts), corners[-1.0], corners[1.0]


def _in_eye(xy, interocular, scale=1.0):
    half = interocular / 2.0
    out = np.zeros(len(xy), dtype=bool)
    for cx in (-half, half):
        out |= ((xy[:, 0] - cx) / (0.014 * scale)) ** 2 + (xy[:, 1] / (0.005 * scale)) ** 2 < 1.0
    return out


def _smooth_field(rng, points, n_centres=4, width=0.03):
    centres = points[rng.choice(len(points), size=n_centres, replace=False)]
    amps = rng.normal(size=(n_centres, 3))
    d2 = ((points[:, None, :] - centres[None, :, :]) ** 2).sum(axis=-1)
    w = np.exp(-d2 / (2.0 * width**2))
    disp = w @ amps
    return disp / np.max(np.linalg.norm(disp, axis=1))


def synthetic_basis(config: SyntheticBasisConfig | None = None, seed: int = 0) -> LinearBasis:
    """Procedural two-eyeball + brow/nose basis, deterministic per seed.

    Shape mode 0 widens the interocular distance, mode 1 grows both eyeballs;
    the remaining modes are smooth random deformations.
    """
    cfg = config or SyntheticBasisConfig()
    cfg.validate()
    rng = np.random.default_rng(seed)
    half = cfg.interocular / 2.0

    sphere, sphere_faces = _uv_sphere(cfg.eyeball_rings, cfg.eyeball_segments, cfg.eyeball_radius)
    n_eye = len(sphere)
    left_centre = np.array([-half, 0.0, 0.0])
    right_centre = np.array([half, 0.0, 0.0])

    lm_xy, left_corner_pos, right_corner_pos = _landmark_layout(cfg.interocular)
    x0, x1, y0, y1 = cfg.extent
    gx, gy = np.meshgrid(
        np.arange(x0, x1 + 1e-12, cfg.grid_spacing), np.arange(y0, y1 + 1e-12, cfg.grid_spacing)
    )
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    near = np.min(np.linalg.norm(grid[:, None, :] - lm_xy[None, :, :], axis=-1), axis=1) < cfg.landmark_clearance
    grid = grid[~near & ~_in_eye(grid, cfg.interocular)]
    patch_xy = np.vstack([lm_xy, grid])
    if len(patch_xy) < N_LANDMARKS:
        raise ValueError("surface patch too small for 31 landmarks")
    tri = Delaunay(patch_xy).simplices
    tri = tri[~_in_eye(patch_xy[tri].mean(axis=1), cfg.interocular)]
    patch = np.column_stack([patch_xy, _face_height(patch_xy[:, 0], patch_xy[:, 1])])

    off_l, off_r, off_p = 0, n_eye, 2 * n_eye
    mean_shape = np.vstack([sphere + left_centre, sphere + right_centre, patch])
    faces = np.vstack([sphere_faces + off_l, sphere_faces + off_r, tri + off_p])
    left_idx = np.arange(off_l, off_l + n_eye)
    right_idx = np.arange(off_r, off_r + n_eye)
    patch_idx = np.arange(off_p, off_p + len(patch))
    landmarks = off_p + np.arange(N_LANDMARKS)
    n = len(mean_shape)

    comps = np.zeros((cfg.n_shape, n, 3))
    # interocular: eyeballs move apart, surrounding skin follows smoothly
    step = cfg.interocular_sigma / 2.0
    comps[0, left_idx, 0] = -step
    comps[0, right_idx, 0] = step
    for cx, sgn in ((-half, -1.0), (half, 1.0)):
        d2 = (patch[:, 0] - cx) ** 2 + patch[:, 1] ** 2
        comps[0, patch_idx, 0] += sgn * step * np.exp(-d2 / (2.0 * 0.012**2))
    comps[1, left_idx] = cfg.radius_sigma * sphere / cfg.eyeball_radius
    comps[1, right_idx] = cfg.radius_sigma * sphere / cfg.eyeball_radius
    for k in range(2, cfg.n_shape):
        disp = cfg.deform_sigma * _smooth_field(rng, patch)
        comps[k, patch_idx] = disp
        # eyeballs follow the skin rigidly so they stay spheres
        for idx, c in ((left_idx, left_centre), (right_idx, right_centre)):
            w = np.exp(-((patch - c) ** 2).sum(axis=1) / (2.0 * 0.03**2))
            comps[k, idx] = (w @ disp) / w.sum()

    mean_color = np.empty((n, 3))
    mean_color[patch_idx] = (0.82, 0.62, 0.52)
    for idx in (left_idx, right_idx):
        front = sphere[:, 2] > 0.8 * cfg.eyeball_radius
        mean_color[idx] = np.where(front[:, None], (0.30, 0.20, 0.12), (0.95, 0.95, 0.93))
    color_comps = np.zeros((cfg.n_color, n, 3))
    for k in range(cfg.n_color):
        color_comps[k, patch_idx] = cfg.color_sigma * _smooth_field(rng, patch)

    return LinearBasis(
        mean_shape=mean_shape,
        shape_components=comps,
        mean_color=mean_color,
        color_components=color_comps,
        faces=faces,
        landmark_indices=landmarks,
        left_eyeball_indices=left_idx,
        right_eyeball_indices=right_idx,
        left_eye_outer_corner=int(landmarks[left_corner_pos]),
        right_eye_outer_corner=int(landmarks[right_corner_pos]),
    )
