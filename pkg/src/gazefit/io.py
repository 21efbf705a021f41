"""JSON / JSONL persistence for bases, cameras, configs, scenes and results.

Floats are written with Python's shortest round-trip ``repr``, so every
save/load cycle reproduces the stored doubles exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from gazefit.camera import CameraIntrinsics
from gazefit.fitter import FitConfig, FitResult
from gazefit.losses import LossWeights
from gazefit.model import LinearBasis, SyntheticBasisConfig
from gazefit.synth import EvalReport, NoiseSpec, SceneRanges, SyntheticScene

BASIS_KEYS = (
    "n_vertices",
    "mean_shape",
    "shape_components",
    "mean_color",
    "color_components",
    "faces",
    "landmarks",
    "left_eyeball",
    "right_eyeball",
    "left_outer_corner",
    "right_outer_corner",
)


class ParseError(ValueError):
    """Malformed input file. ``offset`` is the byte position of the problem, if known."""

    def __init__(self, message, path=None, offset=None):
        where = f"{path}: " if path is not None else ""
        at = f" (byte {offset})" if offset is not None else ""
        super().__init__(f"{where}{message}{at}")
        self.path = path
        self.offset = offset


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def _decode(text: str, path, base: int = 0):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = base + len(text[: exc.pos].encode("utf-8"))
        raise ParseError(exc.msg, path, offset) from None


def read_json(path):
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("not valid UTF-8", path, exc.start) from None
    return _decode(text, path)


def _build(path, factory, data):
    """Run a ``from_dict`` style constructor, reporting schema errors as parse errors."""
    try:
        return factory(data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        detail = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        raise ParseError(f"invalid content: {detail}", path) from None


# ---------------------------------------------------------------------------
# Basis


def basis_to_dict(basis: LinearBasis) -> dict:
    return {
        "n_vertices": basis.n_vertices,
        "mean_shape": basis.mean_shape.tolist(),
        "shape_components": basis.shape_components.tolist(),
        "mean_color": basis.mean_color.tolist(),
        "color_components": basis.color_components.tolist(),
        "faces": basis.faces.tolist(),
        "landmarks": basis.landmark_indices.tolist(),
        "left_eyeball": basis.left_eyeball_indices.tolist(),
        "right_eyeball": basis.right_eyeball_indices.tolist(),
        "left_outer_corner": int(basis.left_eye_outer_corner),
        "right_outer_corner": int(basis.right_eye_outer_corner),
    }


def basis_from_dict(d: dict) -> LinearBasis:
    if not isinstance(d, dict):
        raise ValueError("basis must be a JSON object")
    missing = [k for k in BASIS_KEYS if k not in d]
    if missing:
        raise ValueError(f"basis is missing {missing}")
    n = int(d["n_vertices"])
    basis = LinearBasis(
        mean_shape=np.asarray(d["mean_shape"], dtype=float),
        shape_components=np.asarray(d["shape_components"], dtype=float),
        mean_color=np.asarray(d["mean_color"], dtype=float),
        color_components=np.asarray(d["color_components"], dtype=float),
        faces=np.asarray(d["faces"], dtype=np.int64),
        landmark_indices=np.asarray(d["landmarks"], dtype=np.int64),
        left_eyeball_indices=np.asarray(d["left_eyeball"], dtype=np.int64),
        right_eyeball_indices=np.asarray(d["right_eyeball"], dtype=np.int64),
        left_eye_outer_corner=int(d["left_outer_corner"]),
        right_eye_outer_corner=int(d["right_outer_corner"]),
    )
    if basis.n_vertices != n:
        raise ValueError(f"n_vertices is {n} but mean_shape has {basis.n_vertices} rows")
    return basis


def save_basis(basis: LinearBasis, path):
    write_json(path, basis_to_dict(basis))


def load_basis(path) -> LinearBasis:
    return _build(path, basis_from_dict, read_json(path))


# ---------------------------------------------------------------------------
# Small records


def save_camera(cam: CameraIntrinsics, path):
    write_json(path, cam.to_dict())


def load_camera(path) -> CameraIntrinsics:
    return _build(path, CameraIntrinsics.from_dict, read_json(path))


def save_weights(weights: LossWeights, path):
    write_json(path, weights.to_dict())


def load_weights(path) -> LossWeights:
    return _build(path, LossWeights.from_dict, read_json(path))


def save_fit_config(config: FitConfig, path):
    write_json(path, config.to_dict())


def load_fit_config(path) -> FitConfig:
    return _build(path, FitConfig.from_dict, read_json(path))


def save_fit_result(result: FitResult, path, include_timing: bool = False):
    write_json(path, result.to_dict(include_timing))


def load_fit_result(path) -> FitResult:
    return _build(path, FitResult.from_dict, read_json(path))


def save_report(report: EvalReport, path):
    write_json(path, report.to_dict())


def load_report(path) -> EvalReport:
    return _build(path, EvalReport.from_dict, read_json(path))


# ---------------------------------------------------------------------------
# Run configuration shared by the command line


RUN_SECTIONS = ("basis", "scene_ranges", "noise", "fit", "camera")


def run_config_from_dict(d: dict) -> dict:
    """Parse the optional sections of a command-line config file.

    Missing sections fall back to their defaults.
    """
    if not isinstance(d, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(d) - set(RUN_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")
    basis_kw = dict(d.get("basis", {}))
    if "extent" in basis_kw:
        basis_kw["extent"] = tuple(basis_kw["extent"])
    out = {
        "basis": SyntheticBasisConfig(**basis_kw),
        "scene_ranges": SceneRanges.from_dict(d.get("scene_ranges", {})),
        "noise": NoiseSpec.from_dict(d.get("noise", {})),
        "fit": FitConfig.from_dict(d.get("fit", {})),
        "camera": CameraIntrinsics.from_dict(d["camera"]) if "camera" in d else CameraIntrinsics.default(),
    }
    out["basis"].validate()
    return out


def load_run_config(path) -> dict:
    if path is None:
        return run_config_from_dict({})
    return _build(path, run_config_from_dict, read_json(path))


# ---------------------------------------------------------------------------
# Scenes (JSONL)


def save_scenes(scenes, path):
    lines = [json.dumps(s.to_dict(), sort_keys=True, allow_nan=False) for s in scenes]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_scenes(path) -> list:
    """One scene per non-blank line."""
    raw = Path(path).read_bytes()
    scenes = []
    offset = 0
    for line in raw.splitlines(keepends=True):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("not valid UTF-8", path, offset + exc.start) from None
        if text.strip():
            data = _decode(text, path, base=offset)
            try:
                scenes.append(SyntheticScene.from_dict(data))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"invalid scene on line {len(scenes) + 1}: {exc}", path, offset) from None
        offset += len(line)
    return scenes
