"""Scalar test functions on the half-space z >= 0 and their X-gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import SpacePoint, _alpha, abs_pow, delta_arrays


@dataclass(frozen=True)
class ScalarField:
    """f and its Euclidean gradient, both vectorized over (..., 3) arrays.

    ``center`` and ``half_width`` describe a box (clipped to z >= 0) outside
    of which f and its gradient are negligible; quadrature and sampling
    truncate to it.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    euclid_grad: Callable[[np.ndarray], np.ndarray]
    center: tuple = (0.0, 0.0, 0.0)
    half_width: tuple = (1.0, 1.0, 1.0)

    def __call__(self, p):
        return self.value(np.asarray(p, dtype=float))

    @property
    def z_range(self) -> tuple[float, float]:
        lo = max(0.0, self.center[2] - self.half_width[2])
        return lo, self.center[2] + self.half_width[2]


def _gauss_value(P):
    return np.exp(-P[..., 0] ** 2 - P[..., 1] ** 2 - P[..., 2])


def _gauss_grad(P):
    f = _gauss_value(P)
    return np.stack([-2.0 * P[..., 0] * f, -2.0 * P[..., 1] * f, -f], axis=-1)


def _bump_base(P):
    return np.maximum(1.0 - P[..., 0] ** 2 - P[..., 1] ** 2 - P[..., 2], 0.0)


def _bump_value(P):
    return _bump_base(P) ** 3


def _bump_grad(P):
    g = -3.0 * _bump_base(P) ** 2
    return np.stack([2.0 * P[..., 0] * g, 2.0 * P[..., 1] * g, g], axis=-1)


def _delta_radial(alpha: float) -> ScalarField:
    """exp(-delta(0, q)) with delta(0, q) = |x| + |y| + |z|^(1/(a+1)).

    Lipschitz in delta only: the z-derivative blows up like z^(-a/(a+1)) at
    z = 0 and the x, y derivatives jump across x = 0, y = 0.  Gradients are
    the piecewise formulas (inf on z = 0).
    """
    a = alpha

    def value(P):
        origin = np.zeros(3)
        return np.exp(-delta_arrays(origin, P, a)[4])

    def grad(P):
        f = value(P)
        z = np.abs(P[..., 2])
        with np.errstate(divide="ignore"):
            dz = z ** (1.0 / (a + 1.0) - 1.0) / (a + 1.0)
        return np.stack([-np.sign(P[..., 0]) * f, -np.sign(P[..., 1]) * f, -dz * f], axis=-1)

    return ScalarField("delta_radial", value, grad, (0.0, 0.0, 0.0), (40.0, 40.0, 40.0 ** (a + 1.0)))


BUILTINS = ("gauss", "poly_bump", "delta_radial")


def builtin_fields(name: str, fp=None) -> ScalarField:
    """gauss = exp(-x^2-y^2-z), poly_bump = (1-x^2-y^2-z)_+^3, delta_radial (needs fp)."""
    if name == "gauss":
        # exp(-36) ~ 2e-16 bounds the truncation error
        return ScalarField("gauss", _gauss_value, _gauss_grad, (0.0, 0.0, 0.0), (6.0, 6.0, 36.0))
    if name == "poly_bump":
        return ScalarField("poly_bump", _bump_value, _bump_grad, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    if name == "delta_radial":
        if fp is None:
            raise ValueError("delta_radial needs the frame exponent")
        return _delta_radial(_alpha(fp))
    raise ValueError(f"unknown builtin field {name!r}; choose from {BUILTINS}")


def dilate_field(f: ScalarField, r: float, fp) -> ScalarField:
    """q -> f(r x, r y, r^(a+1) z) with the chain-rule gradient and rescaled support."""
    a = _alpha(fp)
    r = float(r)
    if not r > 0.0:
        raise ValueError("dilation factor must be > 0")
    s = np.array([r, r, r ** (a + 1.0)])

    def value(P):
        return f.value(np.asarray(P, dtype=float) * s)

    def grad(P):
        return f.euclid_grad(np.asarray(P, dtype=float) * s) * s

    center = tuple(float(c) for c in np.asarray(f.center) / s)
    half = tuple(float(h) for h in np.asarray(f.half_width) / s)
    return ScalarField(f"{f.name}@{r:g}", value, grad, center, half)


def translate_field(f: ScalarField, dy: float) -> ScalarField:
    """q -> f(x, y + dy, z); preserves X-gradients pointwise."""
    shift = np.array([0.0, float(dy), 0.0])
    center = (f.center[0], f.center[1] - float(dy), f.center[2])
    return ScalarField(f"{f.name}+y{dy:g}", lambda P: f.value(np.asarray(P) + shift),
                       lambda P: f.euclid_grad(np.asarray(P) + shift), center, f.half_width)


def x_gradient_arrays(f: ScalarField, P, alpha: float) -> np.ndarray:
    """(X1 f, X2 f) = (f_x, f_y + |x|^a f_z) over (..., 3) points."""
    P = np.asarray(P, dtype=float)
    g = f.euclid_grad(P)
    return np.stack([g[..., 0], g[..., 1] + abs_pow(P[..., 0], alpha) * g[..., 2]], axis=-1)


def x_gradient(f: ScalarField, p, fp) -> tuple[float, float]:
    p = SpacePoint.of(p)
    if p.z < 0.0:
        raise ValueError(f"x_gradient needs z >= 0, got z={p.z}")
    g = x_gradient_arrays(f, np.array(tuple(p)), _alpha(fp))
    return float(g[0]), float(g[1])


__all__ = [
    "ScalarField", "BUILTINS", "builtin_fields", "dilate_field", "translate_field",
    "x_gradient", "x_gradient_arrays",
]
