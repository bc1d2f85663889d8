"""Exact flows of constant-control horizontal fields e1*X1 + e2*X2 and horizontal lifts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import FrameParams, SpacePoint, _alpha, abs_pow, signed_pow
from .roots import expand_bracket, solve_increasing

# 8-point Gauss-Legendre rule on [0, 1], used for short intervals where the
# divided difference of the antiderivative would cancel.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def abs_pow_antiderivative(t, alpha: float):
    """sgn(t)|t|^(a+1)/(a+1), an antiderivative of |t|^a."""
    return signed_pow(t, alpha + 1.0) / (alpha + 1.0)


def mean_abs_pow(x0, x1, alpha: float):
    """Mean of |t|^alpha over the segment [x0, x1] (either orientation).

    Closed form through the antiderivative; intervals short relative to their
    distance from 0 use Gauss-Legendre instead (|t|^a is analytic there).
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    h = x1 - x0
    scale = np.maximum(np.abs(x0), np.abs(x1))
    short = np.abs(h) <= 1e-3 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (abs_pow_antiderivative(x1, alpha) - abs_pow_antiderivative(x0, alpha)) / h
    out = np.array(out, dtype=float)
    if np.any(short):
        x0s = np.broadcast_to(x0, out.shape)[short]
        hs = np.broadcast_to(h, out.shape)[short]
        nodes = x0s[:, None] + hs[:, None] * _GL_X
        out[short] = abs_pow(nodes, alpha) @ _GL_W
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ControlSegment:
    """Constant controls (e1, e2) applied for ``duration``.

    Negative durations are normalized to positive ones with negated controls.
    """

    e1: float
    e2: float
    duration: float
    sup_speed: float = field(init=False)
    euclid_speed: float = field(init=False)

    def __post_init__(self):
        e1, e2, t = float(self.e1), float(self.e2), float(self.duration)
        if not all(math.isfinite(v) for v in (e1, e2, t)):
            raise ValueError("segment controls and duration must be finite")
        if t < 0.0:
            e1, e2, t = -e1, -e2, -t
        object.__setattr__(self, "e1", e1 + 0.0)
        object.__setattr__(self, "e2", e2 + 0.0)
        object.__setattr__(self, "duration", t)
        object.__setattr__(self, "sup_speed", max(abs(e1), abs(e2)))
        object.__setattr__(self, "euclid_speed", math.hypot(e1, e2))

    def reversed(self) -> "ControlSegment":
        return ControlSegment(-self.e1, -self.e2, self.duration)


@dataclass(frozen=True)
class HorizontalPath:
    start: SpacePoint
    segments: tuple = ()
    samples: tuple | None = None

    def waypoints(self, fp) -> list[SpacePoint]:
        pts = [self.start]
        for seg in self.segments:
            pts.append(flow(pts[-1], seg, fp))
        return pts

    def end(self, fp) -> SpacePoint:
        return self.waypoints(fp)[-1]

    def resolved(self, fp) -> "HorizontalPath":
        return HorizontalPath(self.start, tuple(self.segments), tuple(self.waypoints(fp)))

    def then(self, other: "HorizontalPath") -> "HorizontalPath":
        return HorizontalPath(self.start, tuple(self.segments) + tuple(other.segments))

    def sample(self, fp, per_segment: int = 16) -> list[tuple[float, SpacePoint]]:
        """(t, point) rows along the path, ``per_segment`` steps per segment."""
        rows = [(0.0, self.start)]
        t0, p = 0.0, self.start
        for seg in self.segments:
            for k in range(1, per_segment + 1):
                s = seg.duration * k / per_segment
                rows.append((t0 + s, flow(p, ControlSegment(seg.e1, seg.e2, s), fp)))
            t0 += seg.duration
            p = rows[-1][1]
        return rows


def flow_arrays(x, y, z, e1, e2, t, alpha: float):
    """Vectorized exact flow; returns the end coordinates."""
    x = np.asarray(x, dtype=float)
    x1 = x + e1 * t
    dz = np.asarray(e2, dtype=float) * t * mean_abs_pow(x, x1, alpha)
    return x1, y + e2 * t, z + dz


def flow(p, seg: ControlSegment, fp) -> SpacePoint:
    """Time-``duration`` flow of e1*X1 + e2*X2 from ``p`` in closed form."""
    a = _alpha(fp)
    p = SpacePoint.of(p)
    x, y, z = flow_arrays(p.x, p.y, p.z, seg.e1, seg.e2, seg.duration, a)
    return SpacePoint(float(x), float(y), float(z))


def lift(kappa, z0: float, fp, start_y=None) -> HorizontalPath:
    """Horizontal lift of the planar polyline ``kappa`` starting at height ``z0``.

    Each edge becomes one unit-Euclidean-speed segment; resolved waypoints carry
    the exact z increments of the affine edges.
    """
    a = _alpha(fp)
    pts = [tuple(map(float, q)) for q in kappa]
    if not pts:
        raise ValueError("empty polyline")
    if not all(math.isfinite(c) for q in pts for c in q):
        raise ValueError("polyline must be finite")
    segs = []
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        length = math.hypot(x1 - x0, y1 - y0)
        if length == 0.0:
            continue
        segs.append(ControlSegment((x1 - x0) / length, (y1 - y0) / length, length))
    path = HorizontalPath(SpacePoint(pts[0][0], pts[0][1], z0), tuple(segs))
    return path.resolved(a)


def polyline_z_gain(xs, ys, alpha: float):
    """Total z increment of the lift of a polyline: sum over edges of mean|x|^a * dy.

    Works on trailing axis of vertex arrays (batched).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    m = mean_abs_pow(xs[..., :-1], xs[..., 1:], alpha)
    return np.sum(m * np.diff(ys, axis=-1), axis=-1)


def square_loop_z(x: float, u: float, fp) -> float:
    """Height gained by lifting the counterclockwise square of side ``u`` based at (x, 0)."""
    a = _alpha(fp)
    x, u = float(x), float(u)
    if x < 0.0 or u <= 0.0:
        raise ValueError(f"square_loop_z needs x >= 0 and u > 0, got x={x}, u={u}")
    return u * ((x + u) ** a - x ** a)


def square_loop_side(x: float, gain: float, fp) -> float:
    """Inverse of ``square_loop_z`` in ``u`` (the map is increasing from 0)."""
    a = _alpha(fp)
    x, gain = abs(float(x)), float(gain)
    if gain < 0.0:
        raise ValueError("gain must be >= 0")
    if gain == 0.0:
        return 0.0
    g = lambda u: u * ((x + u) ** a - x ** a)
    hi = gain ** (1.0 / (a + 1.0))
    if x > 0.0:
        hi = min(hi, math.sqrt(gain / (a * x ** (a - 1.0))))
    hi = expand_bracket(g, gain, hi)
    return solve_increasing(g, gain, 0.0, hi)


def square_loop_path(p, dz: float, fp) -> HorizontalPath:
    """Closed square loop at ``p`` whose lift changes z by exactly ``dz``.

    The square lies on the side of ``p`` away from x = 0 and is traversed
    counterclockwise for dz > 0 (after accounting for the side), so the net
    planar displacement is zero.
    """
    p = SpacePoint.of(p)
    if dz == 0.0:
        return HorizontalPath(p, ())
    u = square_loop_side(abs(p.x), abs(dz), fp)
    s = 1.0 if p.x >= 0.0 else -1.0
    eta = 1.0 if dz > 0.0 else -1.0
    segs = (
        ControlSegment(s, 0.0, u),
        ControlSegment(0.0, eta, u),
        ControlSegment(-s, 0.0, u),
        ControlSegment(0.0, -eta, u),
    )
    return HorizontalPath(p, segs)


def path_length(path: HorizontalPath) -> dict:
    sup = sum(seg.duration * seg.sup_speed for seg in path.segments)
    euc = sum(seg.duration * seg.euclid_speed for seg in path.segments)
    return {"sup_norm_length": sup, "euclid_norm_length": euc}


__all__ = [
    "ControlSegment", "HorizontalPath", "FrameParams", "flow", "flow_arrays", "lift",
    "square_loop_z", "square_loop_side", "square_loop_path", "path_length",
    "mean_abs_pow", "polyline_z_gain", "abs_pow_antiderivative",
]
