"""Loss components and their weighted linear combination.

Seven components in a fixed order: pixel, landmark, gaze origin, gaze target,
skew, gaze pose and regulariser. The pixel slot is kept for arity but is
always zero here (no renderer). Components are grouped for tuning:

* ``g1`` eye-region reconstruction: pix, lm, reg
* ``g2`` appearance-style gaze supervision: g
* ``g3`` geometric vergence: t, o, skew

The origin, target and gaze-pose terms use ``(sum |x_i|)^p``. The default
``p = 1`` is plain L1; ``p = 4`` gives ``||x||_1^4``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from gazefit import ad

COMPONENTS = ("pix", "lm", "o", "t", "skew", "g", "reg")
GROUPS = {"g1": ("pix", "lm", "reg"), "g2": ("g",), "g3": ("t", "o", "skew")}
_GROUP_OF = {c: g for g, members in GROUPS.items() for c in members}


def norm_pow(x, q: int, p: float):
    """``(sum |x_i|^q)^(p/q)`` for ``q`` in {1, 2}."""
    if q == 1:
        s = ad.sum(ad.abs(x))
        return s if p == 1 else s**p
    if q == 2:
        s = ad.sum(x * x)
        return s if p == 2 else ad.sqrt(s) ** p
    raise ValueError(f"unsupported inner norm q={q}")


@dataclass(frozen=True)
class LossWeights:
    pix: float = 0.0
    lm: float = 1.0
    o: float = 1.0
    t: float = 1.0
    skew: float = 1.0
    g: float = 1.0
    reg: float = 1.0
    group_weights: dict = field(default_factory=lambda: {"g1": 1.0, "g2": 1.0, "g3": 1.0})

    def __post_init__(self):
        gw = {"g1": 1.0, "g2": 1.0, "g3": 1.0}
        unknown = set(self.group_weights) - set(gw)
        if unknown:
            raise ValueError(f"unknown loss groups {sorted(unknown)}")
        gw.update({k: float(v) for k, v in self.group_weights.items()})
        object.__setattr__(self, "group_weights", gw)
        for name in COMPONENTS:
            if getattr(self, name) < 0:
                raise ValueError(f"negative weight for {name}")
        if any(v < 0 for v in gw.values()):
            raise ValueError("negative group weight")
        if self.pix != 0:
            raise ValueError("pixel loss is not available; its weight must stay 0")

    def effective(self, name: str) -> float:
        return float(getattr(self, name)) * self.group_weights[_GROUP_OF[name]]

    def as_vector(self) -> np.ndarray:
        return np.array([self.effective(c) for c in COMPONENTS])

    def with_groups(self, **groups) -> "LossWeights":
        gw = dict(self.group_weights)
        gw.update(groups)
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "group_weights"}
        return LossWeights(**kw, group_weights=gw)

    def replace(self, **kw) -> "LossWeights":
        base = {f.name: getattr(self, f.name) for f in fields(self)}
        base.update(kw)
        return LossWeights(**base)

    def to_dict(self) -> dict:
        d = {c: float(getattr(self, c)) for c in COMPONENTS}
        d["group_weights"] = dict(self.group_weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        unknown = set(d) - set(COMPONENTS) - {"group_weights"}
        if unknown:
            raise ValueError(f"unknown weight keys {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items() if k != "group_weights"}, group_weights=d.get("group_weights", {}))


@dataclass(frozen=True)
class LossVector:
    """Component values plus which of them had supervision available."""

    pix: float = 0.0
    lm: float = 0.0
    o: float = 0.0
    t: float = 0.0
    skew: float = 0.0
    g: float = 0.0
    reg: float = 0.0
    active: tuple = COMPONENTS[1:]

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in COMPONENTS], dtype=float)

    def to_dict(self) -> dict:
        d = {c: float(getattr(self, c)) for c in COMPONENTS}
        d["active"] = list(self.active)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LossVector":
        return cls(**{c: float(d[c]) for c in COMPONENTS}, active=tuple(d["active"]))


def combine(vec: LossVector, weights: LossWeights):
    """Weighted sum of the active components."""
    total = 0.0
    for name in COMPONENTS:
        w = weights.effective(name)
        if name in vec.active and w != 0.0:
            total = total + w * getattr(vec, name)
    return total


def loss_origin(o_hat_l, o_hat_r, origins_gt, power: float = 1.0):
    """Gaze-origin loss.

    ``origins_gt`` is either a pair of eyeball centres (summed per eye) or a
    single 3-D point compared with the midpoint of the two predicted centres.
    """
    gt = np.asarray(origins_gt, dtype=float)
    if gt.shape == (3,):
        return norm_pow((o_hat_l + o_hat_r) * 0.5 - gt, 1, power)
    if gt.shape != (2, 3):
        raise ValueError("origins_gt must be a 3-vector or a 2 x 3 array")
    return norm_pow(o_hat_l - gt[0], 1, power) + norm_pow(o_hat_r - gt[1], 1, power)


def loss_landmark(lm_hat, lm_gt):
    lm_gt = np.asarray(lm_gt, dtype=float)
    if np.shape(ad.value(lm_hat)) != lm_gt.shape:
        raise ValueError(f"landmark shapes differ: {np.shape(ad.value(lm_hat))} vs {lm_gt.shape}")
    return norm_pow((lm_hat - lm_gt).reshape(-1), 2, 2)


def loss_target(t_hat, t_gt, power: float = 1.0):
    return norm_pow(t_hat - np.asarray(t_gt, dtype=float), 1, power)


def loss_skew(solution):
    """Squared length of the shortest segment between the gaze lines."""
    return norm_pow(solution.gap, 2, 2)


def loss_gaze(z_eye, gaze_gt, power: float = 1.0):
    """Over the stacked ``(e_l, a_l, e_r, a_r)`` angles in radians."""
    return norm_pow(z_eye - np.asarray(gaze_gt, dtype=float), 1, power)


def loss_reg(z_shape, z_color):
    return norm_pow(ad.concatenate([z_shape, z_color]), 2, 2)


def penalty_behind(solution):
    """``sum_i max(0, -k_i)^2``: segment endpoints behind either eye."""
    k = ad.stack([solution.k_l, solution.k_r])
    return norm_pow(ad.relu(-k), 2, 2)
