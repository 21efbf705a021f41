"""Static exports: OBJ meshes and SVG overlays of fitted vs true gaze."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import quoteattr

import numpy as np

from gazefit.camera import DEPTH_EPS, CameraIntrinsics, DepthNonPositive, project_points
from gazefit.fitter import ParamVector
from gazefit.model import LinearBasis, PoseParams, apply_pose, eyeball_centres, reconstruct_color, reconstruct_shape, rotate_eyeballs
from gazefit.vergence import gaze_rotation, gaze_vector

DEFAULT_RAY_LENGTH = 0.5  # metres, used when the scene has no target
NEAR_PLANE = 1e-3


def posed_mesh(basis: LinearBasis, params: ParamVector) -> np.ndarray:
    """Camera-frame vertices with both eyeballs turned to their gaze."""
    mesh = apply_pose(reconstruct_shape(basis, params.z_S), PoseParams(params.r, params.T, params.f))
    z = params.z_E
    mesh = rotate_eyeballs(mesh, basis, gaze_rotation(z[0], z[1]), gaze_rotation(z[2], z[3]))
    return np.asarray(mesh.vertices, dtype=float)


def obj_text(basis: LinearBasis, params: ParamVector) -> str:
    """``v x y z r g b`` per vertex (6 decimals) and 1-based ``f`` lines."""
    verts = posed_mesh(basis, params)
    colors = reconstruct_color(basis, params.z_A, clamp=True)
    lines = [f"# {basis.n_vertices} vertices, {len(basis.faces)} faces"]
    for (x, y, z), (r, g, b) in zip(verts, colors):
        lines.append(f"v {x:.6f} {y:.6f} {z:.6f} {r:.6f} {g:.6f} {b:.6f}")
    for i, j, k in basis.faces + 1:
        lines.append(f"f {i} {j} {k}")
    return "\n".join(lines) + "\n"


def export_obj(basis: LinearBasis, params: ParamVector, path):
    Path(path).write_text(obj_text(basis, params), encoding="ascii")


def read_obj(path):
    """Minimal reader for the subset written here: returns ``(vertices, faces)``."""
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) for p in parts[1:]])
    return np.array(verts), np.array(faces, dtype=np.int64)


# ---------------------------------------------------------------------------
# SVG


def _edges(faces: np.ndarray) -> np.ndarray:
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    return np.unique(np.sort(e, axis=1), axis=0)


def _clip_ray(origin, direction, length):
    """End point at ``length``, pulled back so it stays in front of the camera."""
    end = origin + length * direction
    if end[2] < NEAR_PLANE and direction[2] < 0:
        s = (origin[2] - NEAR_PLANE) / -direction[2]
        end = origin + max(s, 0.0) * direction
    return end


def _rays(basis, params, length):
    mesh = apply_pose(reconstruct_shape(basis, params.z_S), PoseParams(params.r, params.T, params.f))
    z = params.z_E
    out = []
    for o, (e, a) in zip(eyeball_centres(mesh, basis), ((z[0], z[1]), (z[2], z[3]))):
        o = np.asarray(o, dtype=float)
        out.append((o, _clip_ray(o, np.asarray(gaze_vector(e, a)), length)))
    return out


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def svg_overlay(basis: LinearBasis, cam: CameraIntrinsics, params: ParamVector, scene) -> str:
    """Wireframe, landmark crosses, fitted (red) and true (green) gaze rays.

    ``scene`` is a :class:`gazefit.synth.SyntheticScene`. Both ray pairs use
    the same length: the distance from the true eye midpoint to the target,
    or :data:`DEFAULT_RAY_LENGTH` without a target.
    """
    verts = posed_mesh(basis, params)
    lm = verts[basis.landmark_indices]
    if np.all(lm[:, 2] <= DEPTH_EPS):
        raise DepthNonPositive("every landmark is behind the camera; nothing to draw")
    front = verts[:, 2] > DEPTH_EPS
    uv = np.zeros((len(verts), 2))
    uv[front] = project_points(cam, verts[front])

    truth = scene.true_params
    true_rays = _rays(basis, truth, 1.0)
    mid = 0.5 * (true_rays[0][0] + true_rays[1][0])
    target = scene.obs.target_gt
    length = float(np.linalg.norm(target - mid)) if target is not None else DEFAULT_RAY_LENGTH

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cam.width}" height="{cam.height}" '
        f'viewBox="0 0 {cam.width} {cam.height}">',
        f'<rect width="{cam.width}" height="{cam.height}" fill="white"/>',
        '<g class="wireframe" stroke="#999999" stroke-width="0.5">',
    ]
    for i, j in _edges(basis.faces):
        if front[i] and front[j]:
            (x1, y1), (x2, y2) = uv[i], uv[j]
            out.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}"/>')
    out.append("</g>")
    out.append('<g class="landmarks" stroke="blue" stroke-width="1">')
    size = 3.0
    for idx in basis.landmark_indices:
        if front[idx]:
            x, y = uv[idx]
            out.append(
                f'<path class="landmark" d="M{_fmt(x - size)},{_fmt(y - size)} L{_fmt(x + size)},{_fmt(y + size)} '
                f'M{_fmt(x - size)},{_fmt(y + size)} L{_fmt(x + size)},{_fmt(y - size)}"/>'
            )
    out.append("</g>")
    for cls, color, rays in (("ray-gt", "green", _rays(basis, truth, length)), ("ray-pred", "red", _rays(basis, params, length))):
        for o, end in rays:
            (x1, y1), (x2, y2) = project_points(cam, np.array([o, end]))
            out.append(
                f'<line class={quoteattr(cls)} stroke="{color}" stroke-width="1.5" '
                f'x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}"/>'
            )
    if target is not None and target[2] > DEPTH_EPS:
        x, y = project_points(cam, np.asarray(target))
        out.append(f'<circle class="target" cx="{_fmt(x)}" cy="{_fmt(y)}" r="4" fill="none" stroke="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(basis, cam, params, scene, path):
    Path(path).write_text(svg_overlay(basis, cam, params, scene), encoding="utf-8")
