"""Iterative fitting of shape, pose and eye rotations to observations.

The whole forward model (reconstruction, posing, eyeball centres, gaze rays,
vergence solve, projection) is evaluated on :class:`gazefit.ad.Jet` inputs,
so a single pass yields the Jacobian of every loss residual. The optimiser
is a damped Gauss-Newton / Levenberg-Marquardt loop: squared terms
contribute ``2 J^T J``; L1-type terms use the reweighted majoriser
``J^T diag(1/|x|) J``. A step is accepted only if the total loss drops.
"""

from __future__ import annotations

import functools
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from gazefit import ad
from gazefit import losses as L
from gazefit.camera import CameraIntrinsics, DepthNonPositive, project_landmarks
from gazefit.model import (
    N_LANDMARKS,
    LinearBasis,
    PoseParams,
    apply_pose,
    eyeball_centres,
    reconstruct_shape,
)
from gazefit.vergence import GazeRay, gaze_angles, gaze_vector, vergence

log = logging.getLogger(__name__)

L1_FLOOR = 1e-10
MAX_DAMPING = 1e12


class InfeasiblePoint(ValueError):
    """The forward model cannot be evaluated at these parameters."""


class GradientError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ParamVector:
    """Flat optimisation state ``(z_S, z_A, r, T, log_f, z_E)``.

    ``z_E`` is ordered ``(e_l, a_l, e_r, a_r)``.
    """

    values: np.ndarray
    n_shape: int
    n_color: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.n_shape + self.n_color + 11,):
            raise ValueError(f"expected {self.n_shape + self.n_color + 11} parameters, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("parameters must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_parts(cls, z_S, z_A, r, T, log_f=0.0, z_E=(0.0, 0.0, 0.0, 0.0)) -> "ParamVector":
        z_S, z_A = np.atleast_1d(np.asarray(z_S, float)), np.atleast_1d(np.asarray(z_A, float))
        vals = np.concatenate([z_S, z_A, np.asarray(r, float), np.asarray(T, float), [float(log_f)], np.asarray(z_E, float)])
        return cls(vals, len(z_S), len(z_A))

    @classmethod
    def zeros(cls, basis: LinearBasis) -> "ParamVector":
        return cls(np.zeros(basis.n_shape + basis.n_color + 11), basis.n_shape, basis.n_color)

    def __len__(self):
        return self.values.size

    @property
    def slices(self) -> dict:
        s, a = self.n_shape, self.n_color
        return {
            "z_S": slice(0, s),
            "z_A": slice(s, s + a),
            "r": slice(s + a, s + a + 3),
            "T": slice(s + a + 3, s + a + 6),
            "log_f": slice(s + a + 6, s + a + 7),
            "z_E": slice(s + a + 7, s + a + 11),
        }

    def __getattr__(self, name):
        if name in ("z_S", "z_A", "r", "T", "z_E"):
            return self.values[self.slices[name]]
        raise AttributeError(name)

    @property
    def log_f(self) -> float:
        return float(self.values[self.slices["log_f"]][0])

    @property
    def f(self) -> float:
        return float(np.exp(self.log_f))

    def with_values(self, values) -> "ParamVector":
        return ParamVector(values, self.n_shape, self.n_color)

    def updated(self, **parts) -> "ParamVector":
        v = self.values.copy()
        for name, val in parts.items():
            v[self.slices[name]] = val
        return self.with_values(v)

    def to_dict(self) -> dict:
        return {
            "z_S": self.z_S.tolist(),
            "z_A": self.z_A.tolist(),
            "r": self.r.tolist(),
            "T": self.T.tolist(),
            "log_f": self.log_f,
            "z_E": self.z_E.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamVector":
        return cls.from_parts(d["z_S"], d["z_A"], d["r"], d["T"], d["log_f"], d["z_E"])


@dataclass(frozen=True)
class Observations:
    """Supervision for one scene; any field may be absent (``None``).

    ``origins_gt`` is either a 2 x 3 pair of eyeball centres or a single
    3-D gaze origin; ``gaze_gt`` holds ``(e_l, a_l, e_r, a_r)`` in radians.
    """

    landmarks_gt: np.ndarray | None = None
    target_gt: np.ndarray | None = None
    origins_gt: np.ndarray | None = None
    gaze_gt: np.ndarray | None = None

    def __post_init__(self):
        shapes = {"landmarks_gt": [(N_LANDMARKS, 2)], "target_gt": [(3,)], "origins_gt": [(2, 3), (3,)], "gaze_gt": [(4,)]}
        for name, allowed in shapes.items():
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.array(val, dtype=float)
            if arr.shape not in allowed:
                raise ValueError(f"{name} has shape {arr.shape}, expected one of {allowed}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.landmarks_gt is None and self.target_gt is None:
            raise ValueError("observations need at least 2-D landmarks or a 3-D gaze target")

    def without(self, *names) -> "Observations":
        return replace(self, **{n: None for n in names})

    def to_dict(self) -> dict:
        return {
            "landmarks_gt": None if self.landmarks_gt is None else self.landmarks_gt.tolist(),
            "target_gt": None if self.target_gt is None else self.target_gt.tolist(),
            "origins_gt": None if self.origins_gt is None else self.origins_gt.tolist(),
            "gaze_gt": None if self.gaze_gt is None else self.gaze_gt.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Observations":
        return cls(**{k: d.get(k) for k in ("landmarks_gt", "target_gt", "origins_gt", "gaze_gt")})


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 200
    loss_tol: float = 1e-12
    step_tol: float = 1e-10
    damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.3
    gradient_mode: str = "ad"  # "ad" or "fd"
    weights: L.LossWeights = field(default_factory=L.LossWeights)
    literal_norm_mode: bool = False
    behind_weight: float = 0.0
    warm_start: bool = True

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not (self.damping > 0 and self.damping_up > 1 and 0 < self.damping_down < 1):
            raise ValueError("damping must be positive, with up > 1 and 0 < down < 1")
        if self.loss_tol < 0 or self.step_tol < 0 or self.behind_weight < 0:
            raise ValueError("tolerances and penalty weight must be non-negative")
        if self.gradient_mode not in ("ad", "fd"):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")

    @property
    def norm_power(self) -> float:
        return 4.0 if self.literal_norm_mode else 1.0

    def to_dict(self) -> dict:
        return {
            "max_iters": self.max_iters,
            "loss_tol": self.loss_tol,
            "step_tol": self.step_tol,
            "damping": self.damping,
            "damping_up": self.damping_up,
            "damping_down": self.damping_down,
            "gradient_mode": self.gradient_mode,
            "weights": self.weights.to_dict(),
            "literal_norm_mode": self.literal_norm_mode,
            "behind_weight": self.behind_weight,
            "warm_start": self.warm_start,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown fit config keys {sorted(unknown)}")
        kw = dict(d)
        if "weights" in kw:
            kw["weights"] = L.LossWeights.from_dict(kw["weights"])
        return cls(**kw)


@dataclass
class FitResult:
    params: ParamVector
    loss_trace: list
    total_trace: list
    converged: bool
    reason: str
    iterations: int
    diverging: tuple = (False, False)
    parallel: bool = False
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "params": self.params.to_dict(),
            "loss_trace": [v.to_dict() for v in self.loss_trace],
            "total_trace": [float(t) for t in self.total_trace],
            "converged": self.converged,
            "reason": self.reason,
            "iterations": self.iterations,
            "diverging": list(self.diverging),
            "parallel": self.parallel,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(
            params=ParamVector.from_dict(d["params"]),
            loss_trace=[L.LossVector.from_dict(v) for v in d["loss_trace"]],
            total_trace=list(d["total_trace"]),
            converged=bool(d["converged"]),
            reason=d["reason"],
            iterations=int(d["iterations"]),
            diverging=tuple(d.get("diverging", (False, False))),
            parallel=bool(d.get("parallel", False)),
            wall_time=float(d.get("wall_time", 0.0)),
        )


# ---------------------------------------------------------------------------
# Forward model


@functools.lru_cache(maxsize=16)
def _compact(basis: LinearBasis) -> LinearBasis:
    """Basis restricted to the vertices any loss can see."""
    keep = np.unique(
        np.concatenate(
            [
                basis.landmark_indices,
                basis.left_eyeball_indices,
                basis.right_eyeball_indices,
                [basis.left_eye_outer_corner, basis.right_eye_outer_corner],
            ]
        )
    )
    remap = {int(v): i for i, v in enumerate(keep)}
    sub = lambda idx: np.array([remap[int(i)] for i in idx], dtype=np.int64)  # noqa: E731
    return LinearBasis(
        mean_shape=basis.mean_shape[keep],
        shape_components=basis.shape_components[:, keep],
        mean_color=basis.mean_color[keep],
        color_components=basis.color_components[:, keep],
        faces=np.zeros((0, 3), dtype=np.int64),
        landmark_indices=sub(basis.landmark_indices),
        left_eyeball_indices=sub(basis.left_eyeball_indices),
        right_eyeball_indices=sub(basis.right_eyeball_indices),
        left_eye_outer_corner=remap[basis.left_eye_outer_corner],
        right_eye_outer_corner=remap[basis.right_eye_outer_corner],
    )


@dataclass
class Forward:
    mesh: object
    origins: tuple
    rays: tuple
    solution: object
    landmarks: object
    z_E: object


def forward(theta, layout: ParamVector, basis: LinearBasis, cam: CameraIntrinsics, need_landmarks: bool = True) -> Forward:
    """Run the model at ``theta`` (array or Jet laid out like ``layout``)."""
    s = layout.slices
    sb = _compact(basis)
    mesh = reconstruct_shape(sb, theta[s["z_S"]])
    log_f = theta[s["log_f"]][0]
    mesh = apply_pose(mesh, PoseParams(theta[s["r"]], theta[s["T"]], ad.exp(log_f)))
    o_l, o_r = eyeball_centres(mesh, sb)
    z_E = theta[s["z_E"]]
    rays = (GazeRay(o_l, gaze_vector(z_E[0], z_E[1])), GazeRay(o_r, gaze_vector(z_E[2], z_E[3])))
    solution = vergence(*rays)
    landmarks = project_landmarks(cam, mesh, sb) if need_landmarks else None
    return Forward(mesh, (o_l, o_r), rays, solution, landmarks, z_E)


@dataclass
class Term:
    component: str
    kind: str  # "sq" or "l1"
    power: float
    residual: object
    weight: float

    def value(self):
        q = 2 if self.kind == "sq" else 1
        return L.norm_pow(self.residual, q, self.power)


def _terms(theta, layout, basis, cam, obs: Observations, config: FitConfig) -> list:
    w = config.weights
    p = config.norm_power
    s = layout.slices
    fw = forward(theta, layout, basis, cam, need_landmarks=obs.landmarks_gt is not None)
    terms = []
    if obs.landmarks_gt is not None:
        terms.append(Term("lm", "sq", 2.0, (fw.landmarks - obs.landmarks_gt).reshape(-1), w.effective("lm")))
    if obs.origins_gt is not None:
        o_l, o_r = fw.origins
        if obs.origins_gt.shape == (3,):
            terms.append(Term("o", "l1", p, (o_l + o_r) * 0.5 - obs.origins_gt, w.effective("o")))
        else:
            terms.append(Term("o", "l1", p, o_l - obs.origins_gt[0], w.effective("o")))
            terms.append(Term("o", "l1", p, o_r - obs.origins_gt[1], w.effective("o")))
    if obs.target_gt is not None:
        if fw.solution.parallel and w.effective("t") > 0:
            raise InfeasiblePoint("parallel gaze rays have no vergence target")
        terms.append(Term("t", "l1", p, fw.solution.t_hat - obs.target_gt, w.effective("t")))
    terms.append(Term("skew", "sq", 2.0, fw.solution.gap, w.effective("skew")))
    if obs.gaze_gt is not None:
        terms.append(Term("g", "l1", p, fw.z_E - obs.gaze_gt, w.effective("g")))
    terms.append(Term("reg", "sq", 2.0, ad.concatenate([theta[s["z_S"]], theta[s["z_A"]]]), w.effective("reg")))
    if config.behind_weight > 0:
        k = ad.stack([fw.solution.k_l, fw.solution.k_r])
        terms.append(Term("behind", "sq", 2.0, ad.relu(-k), config.behind_weight))
    return terms


def _safe_terms(theta, layout, basis, cam, obs, config):
    try:
        return _terms(theta, layout, basis, cam, obs, config)
    except DepthNonPositive as exc:
        raise InfeasiblePoint(str(exc)) from exc


def _as_config(config) -> FitConfig:
    if config is None:
        return FitConfig()
    if isinstance(config, L.LossWeights):
        return FitConfig(weights=config)
    return config


def evaluate(params: ParamVector, basis: LinearBasis, cam: CameraIntrinsics, obs: Observations, config=None):
    """Loss components and weighted total at ``params``.

    ``config`` may be a :class:`FitConfig` or just :class:`LossWeights`.
    Raises :class:`InfeasiblePoint` when a landmark falls behind the camera
    or the target loss is requested for parallel rays.
    """
    config = _as_config(config)
    _check_layout(params, basis)
    p = config.norm_power
    try:
        fw = forward(params.values, params, basis, cam, need_landmarks=obs.landmarks_gt is not None)
    except DepthNonPositive as exc:
        raise InfeasiblePoint(str(exc)) from exc
    vals = {"reg": L.loss_reg(params.z_S, params.z_A), "skew": L.loss_skew(fw.solution)}
    active = ["skew", "reg"]
    if obs.landmarks_gt is not None:
        vals["lm"] = L.loss_landmark(fw.landmarks, obs.landmarks_gt)
        active.append("lm")
    if obs.origins_gt is not None:
        vals["o"] = L.loss_origin(*fw.origins, obs.origins_gt, power=p)
        active.append("o")
    if obs.target_gt is not None:
        if fw.solution.parallel and config.weights.effective("t") > 0:
            raise InfeasiblePoint("parallel gaze rays have no vergence target")
        vals["t"] = L.loss_target(fw.solution.t_hat, obs.target_gt, power=p)
        active.append("t")
    if obs.gaze_gt is not None:
        vals["g"] = L.loss_gaze(params.z_E, obs.gaze_gt, power=p)
        active.append("g")
    vec = L.LossVector(**{k: float(v) for k, v in vals.items()}, active=tuple(c for c in L.COMPONENTS if c in active))
    total = float(L.combine(vec, config.weights))
    if config.behind_weight > 0:
        total += config.behind_weight * float(L.penalty_behind(fw.solution))
    return vec, total


def _check_layout(params: ParamVector, basis: LinearBasis):
    if params.n_shape != basis.n_shape or params.n_color != basis.n_color:
        raise ValueError(
            f"parameter layout ({params.n_shape}, {params.n_color}) does not match basis ({basis.n_shape}, {basis.n_color})"
        )


def _fd_step(x: np.ndarray) -> np.ndarray:
    return np.maximum(1e-6, 1e-6 * np.abs(x))


def gradient(params: ParamVector, basis, cam, obs, config=None, mode: str | None = None) -> np.ndarray:
    """Gradient of the total loss with respect to the flat parameter vector."""
    config = _as_config(config)
    _check_layout(params, basis)
    mode = mode or config.gradient_mode
    if mode == "ad":
        terms = _safe_terms(ad.variables(params.values), params, basis, cam, obs, config)
        grad = np.zeros(len(params))
        for t in terms:
            if t.weight != 0.0:
                grad = grad + t.weight * ad.jacobian(t.value(), len(params))
    elif mode == "fd":
        # central differences taken per term, then weighted and summed; this
        # keeps a large term's rounding noise out of a small term's slope
        grad = np.zeros(len(params))
        x = params.values
        h = _fd_step(x)
        for j in range(len(params)):
            xp, xm = x.copy(), x.copy()
            xp[j] += h[j]
            xm[j] -= h[j]
            tp = _safe_terms(xp, params, basis, cam, obs, config)
            tm = _safe_terms(xm, params, basis, cam, obs, config)
            grad[j] = sum(
                a.weight * (float(ad.value(a.value())) - float(ad.value(c.value()))) / (2.0 * h[j])
                for a, c in zip(tp, tm)
                if a.weight != 0.0
            )
    else:
        raise ValueError(f"unknown gradient mode {mode!r}")
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise GradientError(f"non-finite gradient entry at parameter index {int(bad[0])}")
    return grad


def kink_coordinates(params: ParamVector, basis, cam, obs, config=None, tol: float = 1e-6) -> np.ndarray:
    """Parameter indices that move an L1 residual lying within ``tol`` of zero.

    The total loss is not differentiable along those coordinates, so
    gradient checks leave them out.
    """
    config = _as_config(config)
    near = np.zeros(len(params), dtype=bool)
    for term, x, J in _linearise(params.values, params, basis, cam, obs, replace(config, gradient_mode="ad")):
        if term.kind == "l1" and term.weight != 0.0:
            close = np.abs(x) <= tol
            near |= np.any(J[close] != 0.0, axis=0)
    return np.flatnonzero(near)


def _linearise(x, layout, basis, cam, obs, config):
    """Residuals and Jacobians of every weighted term at ``x``."""
    if config.gradient_mode == "ad":
        terms = _safe_terms(ad.variables(x), layout, basis, cam, obs, config)
        return [(t, np.ravel(ad.value(t.residual)), ad.jacobian(t.residual, x.size).reshape(-1, x.size)) for t in terms]
    terms = _safe_terms(x, layout, basis, cam, obs, config)
    h = _fd_step(x)
    jac = [np.zeros((np.size(t.residual), x.size)) for t in terms]
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        tp = _safe_terms(xp, layout, basis, cam, obs, config)
        tm = _safe_terms(xm, layout, basis, cam, obs, config)
        for k in range(len(terms)):
            jac[k][:, j] = (np.ravel(tp[k].residual) - np.ravel(tm[k].residual)) / (2.0 * h[j])
    return [(t, np.ravel(t.residual), J) for t, J in zip(terms, jac)]


def _normal_equations(lin, n):
    g = np.zeros(n)
    H = np.zeros((n, n))
    for term, x, J in lin:
        w = term.weight
        if w == 0.0:
            continue
        if term.kind == "sq":
            g += 2.0 * w * (J.T @ x)
            H += 2.0 * w * (J.T @ J)
            continue
        p = term.power
        s = float(np.abs(x).sum())
        sg = np.sign(x)
        Jsg = J.T @ sg
        scale = w * p * s ** (p - 1.0)
        g += scale * Jsg
        H += (J.T * (scale / np.maximum(np.abs(x), L1_FLOOR))) @ J
        if p > 1:
            H += w * p * (p - 1.0) * s ** (p - 2.0) * np.outer(Jsg, Jsg)
    return g, H


def _solve(H, g, mu):
    d = np.diag(H).copy()
    d = np.maximum(d, 1e-9 * max(d.max(initial=0.0), 1e-12))
    A = H + mu * np.diag(d)
    try:
        return np.linalg.solve(A, -g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, -g, rcond=None)[0]


def _descend(x, layout, basis, cam, obs, config, budget, total):
    """Damped iterations from ``x``; returns the accepted path and the stop state."""
    path = []
    mu = config.damping
    converged, reason = False, "iteration budget"
    lin = None
    it = 0
    while it < budget:
        if lin is None:
            lin = _linearise(x, layout, basis, cam, obs, config)
            g, H = _normal_equations(lin, x.size)
        step = _solve(H, g, mu)
        it += 1
        if np.linalg.norm(step) <= config.step_tol * (np.linalg.norm(x) + config.step_tol):
            converged, reason = True, "step tolerance"
            break
        cand = layout.with_values(x + step) if np.all(np.isfinite(x + step)) else None
        try:
            new_vec, new_total = evaluate(cand, basis, cam, obs, config) if cand is not None else (None, np.inf)
        except InfeasiblePoint:
            new_vec, new_total = None, np.inf
        if new_total < total:
            decrease = total - new_total
            x = x + step
            total = new_total
            path.append((x, new_vec, new_total))
            mu = max(mu * config.damping_down, 1e-15)
            lin = None
            if decrease <= config.loss_tol:
                converged, reason = True, "loss tolerance"
                break
        else:
            mu *= config.damping_up
            if mu > MAX_DAMPING:
                reason = "stalled: every step rejected"
                break
    return x, path, converged, reason, it


def fit(obs: Observations, basis: LinearBasis, cam: CameraIntrinsics, init: ParamVector, config: FitConfig | None = None) -> FitResult:
    """Minimise the weighted loss from ``init``.

    With ``config.warm_start`` and an active target term, the first half of
    the iteration budget is spent without that term: its value blows up as
    the rays pass through parallel, which traps starts whose rays diverge.
    The warm-up result is kept only if it lowers the full objective, so the
    recorded total never increases.
    """
    config = config or FitConfig()
    _check_layout(init, basis)
    started = time.perf_counter()
    try:
        vec, total = evaluate(init, basis, cam, obs, config)
    except InfeasiblePoint as exc:
        raise InfeasiblePoint(f"initial parameters are infeasible: {exc}") from exc
    if not np.isfinite(total):
        raise InfeasiblePoint("initial loss is not finite")

    x = init.values.copy()
    losses, totals = [vec], [total]
    used = 0
    warm = (
        config.warm_start
        and obs.target_gt is not None
        and obs.landmarks_gt is not None
        and config.weights.effective("t") > 0
        and config.max_iters >= 2
    )
    if warm:
        reduced = obs.without("target_gt")
        _, warm_total = evaluate(init, basis, cam, reduced, config)
        x1, _, _, _, used = _descend(x, init, basis, cam, reduced, config, config.max_iters // 2, warm_total)
        try:
            vec1, total1 = evaluate(init.with_values(x1), basis, cam, obs, config)
        except InfeasiblePoint:
            total1 = np.inf
        if total1 < total:
            x, total = x1, total1
            losses.append(vec1)
            totals.append(total1)
    x, path, converged, reason, it = _descend(x, init, basis, cam, obs, config, config.max_iters - used, total)
    for _, v, t in path:
        losses.append(v)
        totals.append(t)
    it += used
    final = init.with_values(x)
    fw = forward(final.values, final, basis, cam, need_landmarks=False)
    log.debug("fit finished after %d iterations: %s, loss %.3e", it, reason, totals[-1])
    return FitResult(
        params=final,
        loss_trace=losses,
        total_trace=totals,
        converged=converged,
        reason=reason,
        iterations=it,
        diverging=fw.solution.diverging_flags,
        parallel=fw.solution.parallel,
        wall_time=time.perf_counter() - started,
    )


def aim_at(params: ParamVector, basis: LinearBasis, cam: CameraIntrinsics, target) -> ParamVector:
    """Set both eye rotations to look from the current eyeball centres at ``target``."""
    fw = forward(params.values, params, basis, cam, need_landmarks=False)
    angles = []
    for o in fw.origins:
        ga = gaze_angles(np.asarray(target, float) - o)
        angles += [ga.elevation, ga.azimuth]
    return params.updated(z_E=angles)


def init_params(obs: Observations, basis: LinearBasis, cam: CameraIntrinsics, assumed_depth: float | None = None) -> ParamVector:
    """Mean shape, identity rotation, translation from landmark alignment.

    Depth comes from the ratio of model to image landmark spread unless
    ``assumed_depth`` is given. With an observed target both eyes are aimed
    at it; otherwise gaze stays along +z.
    """
    if obs.landmarks_gt is None:
        raise ValueError("init_params needs 2-D landmarks")
    lm = obs.landmarks_gt
    c2 = lm.mean(axis=0)
    spread2 = np.sqrt(((lm - c2) ** 2).sum(axis=1).mean())
    if not spread2 > 1e-9:
        raise ValueError("degenerate landmarks: zero spread")
    model = basis.mean_shape[basis.landmark_indices]
    m = model.mean(axis=0)
    spread3 = np.sqrt(((model[:, :2] - m[:2]) ** 2).sum(axis=1).mean())
    depth = assumed_depth if assumed_depth is not None else 0.5 * (cam.fx + cam.fy) * spread3 / spread2
    T = np.array([(c2[0] - cam.cx) * depth / cam.fx - m[0], (c2[1] - cam.cy) * depth / cam.fy - m[1], depth - m[2]])
    params = ParamVector.zeros(basis).updated(T=T)
    if obs.target_gt is not None:
        aimed = aim_at(params, basis, cam, obs.target_gt)
        g_l = gaze_vector(*aimed.z_E[:2])
        g_r = gaze_vector(*aimed.z_E[2:])
        if np.linalg.norm(np.cross(g_l, g_r)) > 1e-8:
            params = aimed
    return params

