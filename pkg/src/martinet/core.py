"""Frame parameters, points and the quasi-distance of the frame X1 = d/dx, X2 = d/dy + |x|^a d/dz.

Everything here is a pure function of its inputs.  The array kernels
(``zeta_arrays``, ``delta_arrays``, ...) broadcast over leading axes and are
what the scalar wrappers call, so scalar and vectorized results agree bit for
bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class FrameParams:
    """Exponent ``alpha >= 1`` of the frame."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not math.isfinite(a) or a < 1.0:
            raise ValueError(f"alpha must be a finite real >= 1, got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def is_integer(self) -> bool:
        return self.alpha.is_integer()


@dataclass(frozen=True)
class SpacePoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"coordinate {name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.y, self.z))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def of(cls, p) -> "SpacePoint":
        if isinstance(p, SpacePoint):
            return p
        if isinstance(p, SurfacePoint):
            return p.lift()
        x, y, z = (float(c) for c in p)
        return cls(x, y, z)


@dataclass(frozen=True)
class SurfacePoint:
    """A point of the boundary plane z = 0."""

    x: float
    y: float

    def __post_init__(self):
        for name in ("x", "y"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"coordinate {name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.y))

    def lift(self) -> SpacePoint:
        return SpacePoint(self.x, self.y, 0.0)

    @classmethod
    def of(cls, u) -> "SurfacePoint":
        if isinstance(u, SurfacePoint):
            return u
        if isinstance(u, SpacePoint):
            if u.z != 0.0:
                raise ValueError(f"point {u} is not on the plane z=0")
            return cls(u.x, u.y)
        x, y = (float(c) for c in u)
        return cls(x, y)


@dataclass(frozen=True)
class DeltaBreakdown:
    dx: float
    dy: float
    zeta: float
    vertical: float
    total: float


@dataclass(frozen=True)
class BesovParams:
    """Integrability ``p > 1``; the smoothness ``s = 1 - 1/p`` is derived."""

    p: float
    s: float = float("nan")

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or p <= 1.0:
            raise ValueError(f"p must be a finite real > 1, got {self.p!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "s", 1.0 - 1.0 / p)


def abs_pow(x, a: float):
    """|x|**a with an integer fast path (repeated multiplication is exact for small ints)."""
    ax = np.abs(x)
    if float(a).is_integer():
        return ax ** int(a)
    return ax ** a


def signed_pow(x, a: float):
    return np.sign(x) * abs_pow(x, a)


def _alpha(fp) -> float:
    return fp.alpha if isinstance(fp, FrameParams) else FrameParams(fp).alpha


# ---------------------------------------------------------------- array kernels


def zeta_arrays(p, q, alpha: float):
    """zeta = z - z' + |x|^alpha (y' - y), using the first point's x."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return p[..., 2] - q[..., 2] + abs_pow(p[..., 0], alpha) * (q[..., 1] - p[..., 1])


def vertical_term(zeta, x, alpha: float):
    """min{|zeta|^(1/(a+1)), |zeta|^(1/2) / |x|^((a-1)/2)}.

    Branch order: zeta == 0 gives 0, then x == 0 gives the first entry, so
    0/0 is never formed.  A subnormal |x| overflows the second entry to inf,
    which the min discards.
    """
    zeta = np.asarray(zeta, dtype=float)
    x = np.asarray(x, dtype=float)
    az = np.abs(zeta)
    ax = np.abs(x)
    first = az ** (1.0 / (alpha + 1.0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        second = np.sqrt(az) / ax ** ((alpha - 1.0) / 2.0)
    out = np.where(ax == 0.0, first, np.minimum(first, second))
    out = np.where(az == 0.0, 0.0, out)
    return out if out.ndim else float(out)


def delta_arrays(p, q, alpha: float):
    """Vectorized quasi-distance; returns (dx, dy, zeta, vertical, total)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dx = np.abs(q[..., 0] - p[..., 0])
    dy = np.abs(q[..., 1] - p[..., 1])
    zeta = zeta_arrays(p, q, alpha)
    vert = np.asarray(vertical_term(zeta, p[..., 0], alpha))
    return dx, dy, zeta, vert, dx + dy + vert


def delta_max_form(p, q, alpha: float):
    """max{|dx|, |dy|, vertical}: the gauge whose sublevel sets are B1 u B2."""
    dx, dy, _, vert, _ = delta_arrays(p, q, alpha)
    return np.maximum(np.maximum(dx, dy), vert)


def delta_plane_arrays(u, v):
    """|x - x'| + |y - y'| + |x|^(1/2) |y' - y|^(1/2) for planar points."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    dx = np.abs(v[..., 0] - u[..., 0])
    dy = np.abs(v[..., 1] - u[..., 1])
    return dx + dy + np.sqrt(np.abs(u[..., 0]) * dy)


def dilate_arrays(p, r: float, alpha: float):
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    out[..., 0] = r * p[..., 0]
    out[..., 1] = r * p[..., 1]
    out[..., 2] = r ** (alpha + 1.0) * p[..., 2]
    return out


# ---------------------------------------------------------------- scalar API


def zeta(p, q, fp) -> float:
    return float(zeta_arrays(tuple(SpacePoint.of(p)), tuple(SpacePoint.of(q)), _alpha(fp)))


def delta(p, q, fp) -> DeltaBreakdown:
    """Quasi-distance from ``p`` to ``q`` with its components.

    Not symmetric: the vertical term uses ``p.x``.
    """
    a = _alpha(fp)
    dx, dy, z, vert, total = delta_arrays(tuple(SpacePoint.of(p)), tuple(SpacePoint.of(q)), a)
    return DeltaBreakdown(float(dx), float(dy), float(z), float(vert), float(total))


def delta_plane(u, v, fp=None) -> float:
    """Plane-restricted distance formula; independent of alpha."""
    return float(delta_plane_arrays(tuple(SurfacePoint.of(u)), tuple(SurfacePoint.of(v))))


def dilate(p, r: float, fp) -> SpacePoint:
    """(x, y, z) -> (r x, r y, r^(alpha+1) z)."""
    r = float(r)
    if not r >= 0.0:
        raise ValueError(f"dilation factor must be >= 0, got {r!r}")
    a = _alpha(fp)
    p = SpacePoint.of(p)
    return SpacePoint(r * p.x, r * p.y, r ** (a + 1.0) * p.z)


def symmetry_transforms(p, translate_y: float = 0.0, translate_z: float = 0.0,
                        reflect_x: bool = False) -> SpacePoint:
    """Apply (x, y, z) -> (+-x, y + translate_y, z + translate_z)."""
    p = SpacePoint.of(p)
    x = -p.x if reflect_x else p.x
    return SpacePoint(x, p.y + translate_y, p.z + translate_z)
