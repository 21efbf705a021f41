"""Synthetic ground-truth scenes and benchmark metrics.

Scenes are sampled from the model itself. The eye rotations are solved from
the eyeball centres and a sampled target so both true gaze rays pass exactly
through the target. The face looks along camera +z and targets lie beyond
it, so forward gaze corresponds to zero elevation and azimuth.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from gazefit.camera import DEPTH_EPS, CameraIntrinsics, angular_error, project_landmarks, project_points
from gazefit.fitter import FitConfig, InfeasiblePoint, Observations, ParamVector, aim_at, fit, forward, init_params
from gazefit.losses import LossWeights
from gazefit.model import LinearBasis, PoseParams, apply_pose, reconstruct_shape
from gazefit.vergence import gaze_vector


@dataclass(frozen=True)
class SceneRanges:
    depth: tuple = (0.8, 1.2)  # camera z of the head, metres
    lateral: tuple = (0.10, 0.08)  # half-widths of the head x / y offset
    rotation: float = 0.15  # max |r_i|, radians
    log_scale: float = 0.05  # max |log f|
    target_distance: tuple = (0.3, 1.5)  # beyond the eyes along +z
    target_spread: tuple = (0.4, 0.3)  # lateral half-width per metre of distance
    shape_sigma: float = 0.0
    color_sigma: float = 0.0
    max_retries: int = 100

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneRanges":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True)
class NoiseSpec:
    """Observation noise. Gaze labels are re-derived from the noisy target."""

    landmark_sigma: float = 0.0  # pixels
    target_sigma: float = 0.0  # metres
    origin_sigma: float = 0.0  # metres

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(**d)


@dataclass(frozen=True)
class SyntheticScene:
    true_params: ParamVector
    obs: Observations
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "noise": self.noise.to_dict(),
            "true_params": self.true_params.to_dict(),
            "obs": self.obs.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticScene":
        return cls(
            true_params=ParamVector.from_dict(d["true_params"]),
            obs=Observations.from_dict(d["obs"]),
            noise=NoiseSpec.from_dict(d.get("noise", {})),
            seed=int(d.get("seed", 0)),
        )


def _clean_landmarks(params: ParamVector, basis: LinearBasis, cam: CameraIntrinsics) -> np.ndarray:
    mesh = reconstruct_shape(basis, params.z_S)
    mesh = apply_pose(mesh, PoseParams(params.r, params.T, params.f))
    return project_landmarks(cam, mesh, basis)


def generate_scene(
    basis: LinearBasis,
    cam: CameraIntrinsics,
    ranges: SceneRanges | None = None,
    noise: NoiseSpec | None = None,
    seed: int = 0,
) -> SyntheticScene:
    ranges = ranges or SceneRanges()
    noise = noise or NoiseSpec()
    rng = np.random.default_rng(seed)
    for _ in range(ranges.max_retries):
        params = ParamVector.from_parts(
            z_S=rng.normal(scale=ranges.shape_sigma, size=basis.n_shape) if ranges.shape_sigma else np.zeros(basis.n_shape),
            z_A=rng.normal(scale=ranges.color_sigma, size=basis.n_color) if ranges.color_sigma else np.zeros(basis.n_color),
            r=rng.uniform(-ranges.rotation, ranges.rotation, size=3),
            T=[
                rng.uniform(-ranges.lateral[0], ranges.lateral[0]),
                rng.uniform(-ranges.lateral[1], ranges.lateral[1]),
                rng.uniform(*ranges.depth),
            ],
            log_f=rng.uniform(-ranges.log_scale, ranges.log_scale),
        )
        fw = forward(params.values, params, basis, cam, need_landmarks=False)
        mid = 0.5 * (fw.origins[0] + fw.origins[1])
        dist = rng.uniform(*ranges.target_distance)
        target = mid + dist * np.array(
            [rng.uniform(-1, 1) * ranges.target_spread[0], rng.uniform(-1, 1) * ranges.target_spread[1], 1.0]
        )
        params = aim_at(params, basis, cam, target)
        try:
            landmarks = _clean_landmarks(params, basis, cam)
        except ValueError:
            continue
        inside = (
            (landmarks[:, 0] >= 0) & (landmarks[:, 0] < cam.width) & (landmarks[:, 1] >= 0) & (landmarks[:, 1] < cam.height)
        )
        if not inside.all() or target[2] <= DEPTH_EPS:
            continue
        break
    else:
        raise ValueError(f"no feasible scene within {ranges.max_retries} retries; check the scene ranges")

    origins = np.array(fw.origins)
    obs_landmarks = landmarks + rng.normal(scale=noise.landmark_sigma, size=landmarks.shape) if noise.landmark_sigma else landmarks
    obs_target = target + rng.normal(scale=noise.target_sigma, size=3) if noise.target_sigma else target
    obs_origins = origins + rng.normal(scale=noise.origin_sigma, size=origins.shape) if noise.origin_sigma else origins
    if noise.target_sigma or noise.origin_sigma:
        # labels follow the measured geometry, as a dataset would compute them
        gaze = []
        for o in obs_origins:
            g = obs_target - o
            gaze += [float(-np.arcsin(g[1] / np.linalg.norm(g))), float(np.arctan2(g[0], g[2]))]
    else:
        gaze = params.z_E.copy()
    obs = Observations(landmarks_gt=obs_landmarks, target_gt=obs_target, origins_gt=obs_origins, gaze_gt=gaze)
    return SyntheticScene(true_params=params, obs=obs, noise=noise, seed=seed)


def generate_scenes(basis, cam, count: int, ranges=None, noise=None, seed: int = 0) -> list:
    """``count`` scenes with per-scene seeds derived from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(count)
    return [generate_scene(basis, cam, ranges, noise, int(s)) for s in seeds]


def perturb_init(truth: ParamVector, seed: int, gaze_deg: float = 5.0, translation: float = 0.005) -> ParamVector:
    """Truth with every gaze angle off by +-``gaze_deg`` and T moved by ``translation``."""
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=4)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return truth.updated(z_E=truth.z_E + signs * np.radians(gaze_deg), T=truth.T + translation * direction)


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class EvalReport:
    angular_mean: float
    angular_std: float
    angular_median: float
    angular_max: float
    landmark_error: float  # pixels per landmark
    normalized_landmark_error: float
    n_scenes: int
    n_failures: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)

    def summary(self) -> str:
        return (
            f"{self.angular_mean:.3f} +- {self.angular_std:.3f} deg | median {self.angular_median:.3f} | "
            f"landmarks {self.landmark_error:.3f} px ({self.normalized_landmark_error:.4f}) | "
            f"{self.n_scenes} scenes, {self.n_failures} failed"
        )


def gaze_vectors(params: ParamVector):
    z = params.z_E
    return gaze_vector(z[0], z[1]), gaze_vector(z[2], z[3])


def evaluate_predictions(scenes, predictions, basis: LinearBasis, cam: CameraIntrinsics) -> EvalReport:
    """Metrics of predicted parameters against each scene's truth.

    ``predictions`` may contain ``None`` for scenes whose fit failed; those
    are counted and left out of the statistics.
    """
    if not scenes:
        raise ValueError("no scenes")
    angles, lm_err, norm_err = [], [], []
    failures = 0
    for scene, pred in zip(scenes, predictions):
        if pred is None:
            failures += 1
            continue
        for g_hat, g_true in zip(gaze_vectors(pred), gaze_vectors(scene.true_params)):
            angles.append(angular_error(g_hat, g_true))
        try:
            fitted = _clean_landmarks(pred, basis, cam)
        except ValueError:
            failures += 1
            continue
        err = float(np.linalg.norm(fitted - _clean_landmarks(scene.true_params, basis, cam), axis=1).mean())
        mesh = apply_pose(reconstruct_shape(basis, pred.z_S), PoseParams(pred.r, pred.T, pred.f))
        corners = project_points(cam, mesh.vertices[[basis.left_eye_outer_corner, basis.right_eye_outer_corner]])
        lm_err.append(err)
        norm_err.append(err / float(np.linalg.norm(corners[0] - corners[1])))
    a = np.array(angles) if angles else np.array([np.nan])
    return EvalReport(
        angular_mean=float(a.mean()),
        angular_std=float(a.std()),
        angular_median=float(np.median(a)),
        angular_max=float(a.max()),
        landmark_error=float(np.mean(lm_err)) if lm_err else float("nan"),
        normalized_landmark_error=float(np.mean(norm_err)) if norm_err else float("nan"),
        n_scenes=len(scenes),
        n_failures=failures,
    )


def fit_scenes(scenes, basis, cam, config: FitConfig | None = None, inits=None) -> list:
    """Fit every scene; ``None`` marks a failed scene. Order follows ``scenes``."""
    results = []
    for i, scene in enumerate(scenes):
        try:
            init = inits[i] if inits is not None else init_params(scene.obs, basis, cam)
            results.append(fit(scene.obs, basis, cam, init, config))
        except (InfeasiblePoint, ValueError, FloatingPointError):
            results.append(None)
    return results


def run_benchmark(scenes, basis, cam, config: FitConfig | None = None, inits=None) -> EvalReport:
    if not scenes:
        raise ValueError("no scenes")
    results = fit_scenes(scenes, basis, cam, config, inits)
    return evaluate_predictions(scenes, [r.params if r is not None else None for r in results], basis, cam)


ABLATIONS = ("baseline", "vergence", "w/o L_o", "full")


def ablation_configs(config: FitConfig | None = None) -> dict:
    """Fit configurations for the four ablation rows: G2 only, G3 only, no origin loss, everything."""
    config = config or FitConfig()
    w = config.weights

    def with_weights(weights: LossWeights) -> FitConfig:
        d = config.to_dict()
        d["weights"] = weights.to_dict()
        return FitConfig.from_dict(d)

    return {
        "baseline": with_weights(w.with_groups(g1=0.0, g2=w.group_weights["g2"], g3=0.0)),
        "vergence": with_weights(w.with_groups(g1=0.0, g2=0.0)),
        "w/o L_o": with_weights(w.replace(o=0.0)),
        "full": config,
    }


def ablation_suite(scenes, basis, cam, config: FitConfig | None = None) -> dict:
    return {name: run_benchmark(scenes, basis, cam, cfg) for name, cfg in ablation_configs(config).items()}


def format_table(reports: dict) -> str:
    header = f"{'method':<12} {'mean':>8} {'std':>8} {'median':>8} {'lm px':>8} {'failed':>6}"
    lines = [header, "-" * len(header)]
    for name, r in reports.items():
        lines.append(
            f"{name:<12} {r.angular_mean:>8.3f} {r.angular_std:>8.3f} {r.angular_median:>8.3f} "
            f"{r.landmark_error:>8.3f} {r.n_failures:>6d}"
        )
    return "\n".join(lines)
