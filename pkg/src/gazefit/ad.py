"""Forward-mode automatic differentiation with vector-valued dual numbers.

A :class:`Jet` carries a value array of shape ``S`` and a derivative array of
shape ``S + (P,)`` holding the partials with respect to ``P`` seed variables.
One forward pass therefore yields the full Jacobian of every intermediate
quantity, which the fitter uses directly as residual Jacobians.

The free functions in this module (``sin``, ``stack``, ``matmul``, ...) accept
plain floats / ndarrays as well as jets, so model code can be written once
and run either numerically or with derivatives attached.
"""

from __future__ import annotations

import numpy as np


class Jet:
    """Value plus first derivatives with respect to ``nvars`` variables."""

    # numpy must defer to our reflected operators instead of broadcasting
    # over the jet as an object.
    __array_ufunc__ = None

    __slots__ = ("value", "deriv")

    def __init__(self, value, deriv):
        self.value = np.asarray(value, dtype=float)
        self.deriv = np.asarray(deriv, dtype=float)
        if self.deriv.shape[:-1] != self.value.shape:
            raise ValueError(
                f"derivative shape {self.deriv.shape} does not match value shape {self.value.shape}"
            )

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def nvars(self):
        return self.deriv.shape[-1]

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Jet(value={self.value!r}, nvars={self.nvars})"

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.value[idx], self.deriv[idx + (slice(None),)])

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        value = self.value.reshape(shape)
        return Jet(value, self.deriv.reshape(value.shape + (self.nvars,)))

    def ravel(self):
        return self.reshape(-1)

    @property
    def T(self):
        if self.ndim != 2:
            raise ValueError("transpose is only defined for 2-D jets")
        return Jet(self.value.T, self.deriv.transpose(1, 0, 2))

    def __neg__(self):
        return Jet(-self.value, -self.deriv)

    def __add__(self, other):
        if isinstance(other, Jet):
            value = self.value + other.value
            return Jet(value, _bcast(self.deriv + other.deriv, value.shape))
        value = self.value + np.asarray(other, dtype=float)
        return Jet(value, _bcast(self.deriv, value.shape))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            value = self.value * other.value
            deriv = self.deriv * other.value[..., None] + other.deriv * self.value[..., None]
            return Jet(value, _bcast(deriv, value.shape))
        c = np.asarray(other, dtype=float)
        value = self.value * c
        return Jet(value, _bcast(self.deriv * c[..., None], value.shape))

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.value
        return Jet(inv, -self.deriv * (inv * inv)[..., None])

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            raise TypeError("jet exponents are not supported")
        p = float(p)
        value = self.value**p
        return Jet(value, self.deriv * (p * self.value ** (p - 1.0))[..., None])


def _bcast(deriv, shape):
    return np.broadcast_to(deriv, tuple(shape) + (deriv.shape[-1],))


def variables(x) -> Jet:
    """Seed a 1-D vector as independent variables (identity Jacobian)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("variables() expects a 1-D vector")
    return Jet(x, np.eye(x.size))


def value(x):
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def jacobian(x, nvars: int) -> np.ndarray:
    """Derivative array of ``x``; zeros for constants."""
    if isinstance(x, Jet):
        return x.deriv
    return np.zeros(np.shape(x) + (nvars,))


def _nvars(items):
    for item in items:
        if isinstance(item, Jet):
            return item.nvars
    return None


def _unary(x, f, df):
    if not isinstance(x, Jet):
        return f(np.asarray(x, dtype=float))
    return Jet(f(x.value), x.deriv * df(x.value)[..., None])


def sin(x):
    return _unary(x, np.sin, np.cos)


def cos(x):
    return _unary(x, np.cos, lambda v: -np.sin(v))


def exp(x):
    return _unary(x, np.exp, np.exp)


def sqrt(x):
    """Square root with derivative 0 at exactly 0 (instead of inf)."""

    def dsqrt(v):
        return np.divide(0.5, np.sqrt(v), out=np.zeros_like(v), where=v > 0)

    return _unary(x, np.sqrt, dsqrt)


def abs(x):  # noqa: A001 - mirrors numpy naming
    """Absolute value; subgradient 0 at the kink."""
    return _unary(x, np.abs, np.sign)


def relu(x):
    """max(x, 0) with derivative 0 at and below 0."""
    return _unary(x, lambda v: np.maximum(v, 0.0), lambda v: (v > 0).astype(float))


def sum(x, axis=None):  # noqa: A001
    if not isinstance(x, Jet):
        return np.sum(x, axis=axis)
    if axis is None:
        return Jet(x.value.sum(), x.deriv.reshape(-1, x.nvars).sum(axis=0))
    axis = axis % x.ndim
    return Jet(x.value.sum(axis=axis), x.deriv.sum(axis=axis))


def mean(x, axis=None):
    n = np.size(value(x)) if axis is None else np.shape(value(x))[axis]
    return sum(x, axis=axis) / n


def dot(a, b):
    """Inner product over the last axis."""
    return sum(a * b, axis=-1)


def cross(a, b):
    """Cross product of 3-vectors (last axis)."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.cross(a, b)
    return stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def norm(x):
    return sqrt(dot(x, x))


def stack(items, axis=0):
    """``np.stack`` accepting a mix of jets and constants."""
    n = _nvars(items)
    if n is None:
        return np.stack([np.asarray(i, dtype=float) for i in items], axis=axis)
    values = [value(i) for i in items]
    derivs = [jacobian(i, n) for i in items]
    out_ndim = values[0].ndim + 1
    ax = axis % out_ndim
    return Jet(np.stack(values, axis=ax), np.stack(derivs, axis=ax))


def concatenate(items, axis=0):
    n = _nvars(items)
    if n is None:
        return np.concatenate([np.asarray(i, dtype=float) for i in items], axis=axis)
    values = [value(i) for i in items]
    ax = axis % values[0].ndim
    return Jet(
        np.concatenate(values, axis=ax),
        np.concatenate([jacobian(i, n) for i in items], axis=ax),
    )


def matmul(a, b):
    """Matrix product for 1-D / 2-D operands, any of which may be a jet."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.matmul(a, b)
    av, bv = value(a), value(b)
    sa = "ik" if av.ndim == 2 else "k"
    sb = "kj" if bv.ndim == 2 else "k"
    out = sa.replace("k", "") + sb.replace("k", "")
    result = np.matmul(av, bv)
    deriv = np.zeros(result.shape + (_nvars([a, b]),))
    if isinstance(b, Jet):
        deriv = deriv + np.einsum(f"{sa},{sb}p->{out}p", av, b.deriv)
    if isinstance(a, Jet):
        deriv = deriv + np.einsum(f"{sa}p,{sb}->{out}p", a.deriv, bv)
    return Jet(result, deriv)


def combine_modes(coeffs, modes):
    """Linear combination ``sum_k coeffs[k] * modes[k]`` over the leading axis.

    ``modes`` is a constant array of shape ``(K, ...)``.
    """
    modes = np.asarray(modes, dtype=float)
    if not isinstance(coeffs, Jet):
        return np.tensordot(np.asarray(coeffs, dtype=float), modes, axes=1)
    return Jet(
        np.tensordot(coeffs.value, modes, axes=1),
        np.tensordot(modes, coeffs.deriv, axes=([0], [0])),
    )
