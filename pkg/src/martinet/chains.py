"""Explicit horizontal chains joining two points of the plane z = 0.

Two constructions, both made of flows of +-X1, +-X2 and +-Z with Z = X1 + X2:

* characteristic chain (y <= y', |x| <= x'):  X2, X1, X2, X1, -X2 with
  tau = |2x|^a (y'-y) / ((2x')^a - |x|^a);
* noncharacteristic chain (y <= y', x >= x' > 0):  X2 for sigma = y'-y+x-x',
  Z back to x', then the commutator loop X2, Z, -X2, -Z of size tau, where
  tau((x'+tau)^a - x'^a) = z' and z' is the height reached after the first
  two legs.

Other pairs are reduced to these by swapping the points (y' >= y), reflecting
x -> -x, and, when the x-ordering is wrong, routing through a third point.
Points are computed from the closed forms; audits replay them through the
exact flows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate

from .core import SpacePoint, SurfacePoint, _alpha, delta_plane
from .fields import ScalarField, x_gradient_arrays
from .flows import ControlSegment, HorizontalPath, flow, flow_arrays, mean_abs_pow
from .roots import expand_bracket, solve_increasing


class CaseLabel(str, Enum):
    CHARACTERISTIC = "characteristic"
    NONCHARACTERISTIC = "noncharacteristic"
    MIXED = "mixed"

    @property
    def effective(self) -> "CaseLabel":
        """Mixed pairs have |x'| >= (1/eps0 - 1) d and are handled as noncharacteristic."""
        return CaseLabel.NONCHARACTERISTIC if self is CaseLabel.MIXED else self


@dataclass(frozen=True)
class ChainConfig:
    eps0: float = 0.1
    root_tol: float = 1e-14

    def __post_init__(self):
        if not 0.0 < self.eps0 < 1.0:
            raise ValueError(f"eps0 must lie in (0, 1), got {self.eps0!r}")
        if not self.root_tol > 0.0:
            raise ValueError("root_tol must be > 0")


_LABELS = {
    (1.0, 0.0): "X1", (-1.0, 0.0): "-X1", (0.0, 1.0): "X2", (0.0, -1.0): "-X2",
    (1.0, 1.0): "Z", (-1.0, -1.0): "-Z", (-1.0, 1.0): "X2-X1", (1.0, -1.0): "X1-X2",
}


def _label(seg: ControlSegment) -> str:
    return _LABELS.get((seg.e1, seg.e2), f"{seg.e1:g}X1{seg.e2:+g}X2")


@dataclass(frozen=True)
class ChainSpec:
    """Points u_0..u_n and the segments joining them (u_j = flow of segment j from u_{j-1})."""

    kind: str
    alpha: float
    points: tuple
    segments: tuple
    scalars: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def generators(self) -> tuple:
        return tuple(_label(s) for s in self.segments)

    @property
    def length(self) -> float:
        """Sum of durations (each generator has unit sup-norm speed)."""
        return float(sum(s.duration for s in self.segments))

    def path(self) -> HorizontalPath:
        return HorizontalPath(self.points[0], tuple(self.segments), tuple(self.points))

    def reversed(self) -> "ChainSpec":
        return ChainSpec(self.kind, self.alpha, tuple(reversed(self.points)),
                         tuple(s.reversed() for s in reversed(self.segments)),
                         dict(self.scalars), self.flags + ("reversed",))

    def reflected(self) -> "ChainSpec":
        pts = tuple(SpacePoint(-p.x, p.y, p.z) for p in self.points)
        segs = tuple(ControlSegment(-s.e1, s.e2, s.duration) for s in self.segments)
        return ChainSpec(self.kind, self.alpha, pts, segs, dict(self.scalars), self.flags + ("reflected",))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "points": [list(p) for p in self.points],
            "generators": list(self.generators),
            "durations": [s.duration for s in self.segments],
            "scalars": dict(self.scalars),
            "flags": list(self.flags),
            "length": self.length,
        }


# ---------------------------------------------------------------- classification


def classify(u, v, fp=None, cfg: ChainConfig = ChainConfig()) -> CaseLabel:
    """Trichotomy with d = delta_plane(u, v).

    Characteristic when d >= eps0 |x| and d >= eps0 |x'|, noncharacteristic
    when both fail, mixed otherwise.  At d = 0 this gives noncharacteristic
    off the line x = 0 and characteristic at points of it.
    """
    u, v = SurfacePoint.of(u), SurfacePoint.of(v)
    d = delta_plane(u, v)
    a = d >= cfg.eps0 * abs(u.x)
    b = d >= cfg.eps0 * abs(v.x)
    if a and b:
        return CaseLabel.CHARACTERISTIC
    if not a and not b:
        return CaseLabel.NONCHARACTERISTIC
    return CaseLabel.MIXED


# ---------------------------------------------------------------- chains


def char_chain(u, v, fp) -> ChainSpec:
    """Characteristic chain from u to v; needs y <= y' and |x| <= x'."""
    a = _alpha(fp)
    u, v = SurfacePoint.of(u), SurfacePoint.of(v)
    x, y, x2, y2 = u.x, u.y, v.x, v.y
    if not (y <= y2 and abs(x) <= x2):
        raise ValueError(f"characteristic chain needs y <= y' and |x| <= x', got u={u}, v={v}")
    flags = ("x=0",) if x == 0.0 else ()
    dy = y2 - y
    ax = abs(x)
    xa = ax ** a
    tau = 0.0 if ax == 0.0 else (2.0 * ax) ** a * dy / ((2.0 * x2) ** a - xa)
    z1 = xa * dy
    z3 = xa * (dy + tau / 2.0 ** a)
    z5 = z3 - x2 ** a * tau
    pts = (
        SpacePoint(x, y, 0.0),
        SpacePoint(x, y2, z1),
        SpacePoint(ax / 2.0, y2, z1),
        SpacePoint(ax / 2.0, y2 + tau, z3),
        SpacePoint(x2, y2 + tau, z3),
        SpacePoint(x2, y2, z5),
    )
    segs = (
        ControlSegment(0.0, 1.0, dy),
        ControlSegment(1.0, 0.0, ax / 2.0 - x),
        ControlSegment(0.0, 1.0, tau),
        ControlSegment(1.0, 0.0, x2 - ax / 2.0),
        ControlSegment(0.0, -1.0, tau),
    )
    return ChainSpec("characteristic", a, pts, segs, {"tau": tau}, flags)


def z_prime_nonchar(x: float, x2: float, dy: float, fp) -> float:
    """z' = (y'-y) x^a + int_{x'}^{x} (x^a - t^a) dt, evaluated without cancellation."""
    a = _alpha(fp)
    xa = abs(x) ** a
    return dy * xa + (x - x2) * (xa - float(mean_abs_pow(x2, x, a)))


def _loop_gain(tau: float, x2: float, a: float) -> float:
    """tau((x'+tau)^a - x'^a) written as a tau^2 mean_{[x', x'+tau]} t^(a-1)."""
    m = 1.0 if a == 1.0 else float(mean_abs_pow(x2, x2 + tau, a - 1.0))
    return a * tau * tau * m


def tau_from_z(x2: float, z: float, fp, tol: float = 1e-14) -> float:
    """Unique tau >= 0 with tau((x'+tau)^a - x'^a) = z, for x' >= 0, z >= 0."""
    a = _alpha(fp)
    if z < 0.0:
        raise ValueError(f"z' must be >= 0, got {z!r}")
    if x2 < 0.0:
        raise ValueError(f"x' must be >= 0, got {x2!r}")
    if z == 0.0:
        return 0.0
    g = lambda t: _loop_gain(t, x2, a)
    # (x'+t)^a - x'^a >= max(t^a, a x'^(a-1) t): both give upper bounds
    hi = z ** (1.0 / (a + 1.0))
    if x2 > 0.0:
        hi = min(hi, math.sqrt(z / (a * x2 ** (a - 1.0))))
    hi = expand_bracket(g, z, hi)
    # normalized to g/z = 1 so the stopping tolerance is relative to z
    return solve_increasing(lambda t: g(t) / z, 1.0, 0.0, hi, tol=tol / 2.0)


def tau_nonchar(x: float, x2: float, dy: float, fp, cfg: ChainConfig = ChainConfig()) -> float:
    if not (x >= x2 > 0.0 and dy >= 0.0):
        raise ValueError(f"tau_nonchar needs x >= x' > 0 and dy >= 0, got {x}, {x2}, {dy}")
    return tau_from_z(x2, z_prime_nonchar(x, x2, dy, fp), fp, cfg.root_tol)


def nonchar_chain(u, v, fp, cfg: ChainConfig = ChainConfig()) -> ChainSpec:
    """Noncharacteristic chain from u to v; needs y <= y' and x >= x' > 0."""
    a = _alpha(fp)
    u, v = SurfacePoint.of(u), SurfacePoint.of(v)
    x, y, x2, y2 = u.x, u.y, v.x, v.y
    if not (y <= y2 and x >= x2 > 0.0):
        raise ValueError(f"noncharacteristic chain needs y <= y' and x >= x' > 0, got u={u}, v={v}")
    dy = y2 - y
    sigma = dy + x - x2
    zp = z_prime_nonchar(x, x2, dy, a)
    tau = tau_from_z(x2, zp, a, cfg.root_tol)
    gain = _loop_gain(tau, x2, a)
    lift_z = tau * float(mean_abs_pow(x2, x2 + tau, a))
    z6 = zp - gain
    z5 = z6 + lift_z
    z3 = zp + x2 ** a * tau
    z4 = z3 + lift_z
    pts = (
        SpacePoint(x, y, 0.0),
        SpacePoint(x, y2 + x - x2, x ** a * sigma),
        SpacePoint(x2, y2, zp),
        SpacePoint(x2, y2 + tau, z3),
        SpacePoint(x2 + tau, y2 + 2.0 * tau, z4),
        SpacePoint(x2 + tau, y2 + tau, z5),
        SpacePoint(x2, y2, z6),
    )
    segs = (
        ControlSegment(0.0, 1.0, sigma),
        ControlSegment(1.0, 1.0, x2 - x),
        ControlSegment(0.0, 1.0, tau),
        ControlSegment(1.0, 1.0, tau),
        ControlSegment(0.0, -1.0, tau),
        ControlSegment(-1.0, -1.0, tau),
    )
    scal = {"sigma": sigma, "tau": tau, "z_prime": zp, "root_residual": abs(gain - zp)}
    return ChainSpec("noncharacteristic", a, pts, segs, scal)


# ---------------------------------------------------------------- normalization


@dataclass
class Plan:
    """How to join u to v: legs (start, end, reverse) in the normalized frame.

    The frame is reached by swapping the points (``swapped``) and then
    reflecting x (``sign`` = -1).  A leg with reverse=True is the chain from
    ``end`` to ``start`` traversed backwards.
    """

    kind: str
    sign: float
    swapped: bool
    legs: list
    log: list


def _orient(u: SurfacePoint, v: SurfacePoint):
    log = []
    swapped = v.y < u.y
    a, b = (v, u) if swapped else (u, v)
    if swapped:
        log.append("swap: enforce y' >= y")
    sign = -1.0 if (b.x < 0.0 or (b.x == 0.0 and a.x < 0.0)) else 1.0
    if sign < 0.0:
        log.append("reflect: x -> -x")
        a, b = SurfacePoint(-a.x, a.y), SurfacePoint(-b.x, b.y)
    return a, b, sign, swapped, log


def normalize(u, v, case: CaseLabel | str = CaseLabel.CHARACTERISTIC) -> Plan:
    """Reduce (u, v) to pairs meeting the preconditions of the chosen chain.

    Characteristic: direct when |x| <= x'; otherwise a third point
    (2x - x', 2y' - y) when x > x', or (-x, 2y' - y) when x < -x', joined
    from both ends.  Noncharacteristic: direct when x >= x' > 0; when
    0 < x < x' the third point (2x - x', 2y' - y) if it has positive x.
    Noncharacteristic pairs that cannot be reduced fall back to the
    characteristic construction (logged).
    """
    case = CaseLabel(case).effective
    u, v = SurfacePoint.of(u), SurfacePoint.of(v)
    a, b, sign, swapped, log = _orient(u, v)
    if case is CaseLabel.NONCHARACTERISTIC:
        if a.x >= b.x > 0.0:
            return Plan("noncharacteristic", sign, swapped, [(a, b, False)], log)
        if 0.0 < a.x < b.x and 2.0 * a.x - b.x > 0.0:
            w = SurfacePoint(2.0 * a.x - b.x, 2.0 * b.y - a.y)
            log.append(f"third point ({w.x!r}, {w.y!r})")
            return Plan("noncharacteristic", sign, swapped, [(a, w, False), (b, w, True)], log)
        log.append("fallback: characteristic chain")
    if abs(a.x) <= b.x:
        return Plan("characteristic", sign, swapped, [(a, b, False)], log)
    if a.x > b.x:
        w = SurfacePoint(2.0 * a.x - b.x, 2.0 * b.y - a.y)
    else:
        w = SurfacePoint(-a.x, 2.0 * b.y - a.y)
    log.append(f"third point ({w.x!r}, {w.y!r})")
    return Plan("characteristic", sign, swapped, [(a, w, False), (b, w, True)], log)


@dataclass
class Connection:
    """Consecutive chains joining u to v in the original coordinates."""

    case: CaseLabel
    chains: list
    log: list

    @property
    def length(self) -> float:
        return float(sum(c.length for c in self.chains))

    def to_dict(self) -> dict:
        return {"case": self.case.value, "log": list(self.log),
                "chains": [c.to_dict() for c in self.chains], "length": self.length}


def connect(u, v, fp, cfg: ChainConfig = ChainConfig(), case=None) -> Connection:
    """Join u to v by chains; the case gate (classify unless given) picks the construction."""
    a = _alpha(fp)
    u, v = SurfacePoint.of(u), SurfacePoint.of(v)
    label = classify(u, v, a, cfg) if case is None else CaseLabel(case)
    plan = normalize(u, v, label)
    build = char_chain if plan.kind == "characteristic" else (lambda s, e, f: nonchar_chain(s, e, f, cfg))
    chains = []
    for start, end, rev in plan.legs:
        c = build(start, end, a)
        chains.append(c.reversed() if rev else c)
    if plan.swapped:
        chains = [c.reversed() for c in reversed(chains)]
    if plan.sign < 0.0:
        chains = [c.reflected() for c in chains]
    return Connection(label, chains, plan.log)


# ---------------------------------------------------------------- audits


def _scale(points) -> float:
    return 1.0 + max(max(abs(c) for c in p) for p in points)


def replay_error(chain: ChainSpec) -> float:
    """max_j |flow(u_{j-1}) - u_j|_inf relative to 1 + max |coordinate|."""
    s = _scale(chain.points)
    err = 0.0
    for p0, seg, p1 in zip(chain.points[:-1], chain.segments, chain.points[1:]):
        q = flow(p0, seg, chain.alpha)
        err = max(err, abs(q.x - p1.x), abs(q.y - p1.y), abs(q.z - p1.z))
    return err / s


def min_z(chain: ChainSpec, per_segment: int = 16) -> float:
    """Minimum of z over ``per_segment`` samples of every segment (exact flows)."""
    zmin = min(p.z for p in chain.points)
    ts = np.linspace(0.0, 1.0, per_segment + 1)[1:-1]
    for p0, seg in zip(chain.points[:-1], chain.segments):
        if seg.duration == 0.0 or len(ts) == 0:
            continue
        _, _, z = flow_arrays(p0.x, p0.y, p0.z, seg.e1, seg.e2, ts * seg.duration, chain.alpha)
        zmin = min(zmin, float(np.min(z)))
    return zmin


def chain_audit(u, v, fp, cfg: ChainConfig = ChainConfig(), case=None) -> dict:
    """Closure, half-space confinement and length of the connection from u to v.

    endpoint_err: worst replay mismatch and final-point mismatch, relative to
    1 + the largest coordinate on the chain.  max_z_violation: max(0, -min z)
    on the same relative scale; min_z is reported unscaled.
    """
    a = _alpha(fp)
    u, v = SurfacePoint.of(u), SurfacePoint.of(v)
    conn = connect(u, v, a, cfg, case)
    pts = [p for c in conn.chains for p in c.points]
    s = _scale(pts)
    end = conn.chains[-1].points[-1]
    start = conn.chains[0].points[0]
    err = max(abs(end.x - v.x), abs(end.y - v.y), abs(end.z), abs(start.x - u.x), abs(start.y - u.y)) / s
    for c in conn.chains:
        err = max(err, replay_error(c))
    for c0, c1 in zip(conn.chains[:-1], conn.chains[1:]):
        j0, j1 = c0.points[-1], c1.points[0]
        err = max(err, max(abs(j0.x - j1.x), abs(j0.y - j1.y), abs(j0.z - j1.z)) / s)
    zmin = min(min_z(c) for c in conn.chains)
    d = delta_plane(u, v)
    length = conn.length
    return {
        "case": conn.case.value,
        "kind": conn.chains[0].kind,
        "pieces": len(conn.chains),
        "log": conn.log,
        "endpoint_err": err,
        "min_z": zmin,
        "max_z_violation": max(0.0, -zmin) / s,
        "length": length,
        "delta_plane": d,
        "length_over_delta": length / d if d > 0.0 else 0.0,
        "tau": [c.scalars.get("tau") for c in conn.chains],
    }


def gradient_line_integral(f: ScalarField, chain, epsrel: float = 1e-8) -> float:
    """Sum over segments of int_0^T |e| |Xf(gamma(t))| dt, gamma(t) the flow of e.

    |e| is the Euclidean size of the control, so the integral bounds
    |f(end) - f(start)| exactly (it is sqrt(2) times the plain integral on Z legs).
    Accepts a ChainSpec or a Connection.
    """
    chains = chain.chains if isinstance(chain, Connection) else [chain]
    total = 0.0
    for c in chains:
        for p0, seg in zip(c.points[:-1], c.segments):
            if seg.duration == 0.0:
                continue

            def integrand(t, p0=p0, seg=seg):
                x, y, z = flow_arrays(p0.x, p0.y, p0.z, seg.e1, seg.e2, t, c.alpha)
                P = np.array([float(x), float(y), max(float(z), 0.0)])
                g = x_gradient_arrays(f, P, c.alpha)
                return float(np.hypot(g[0], g[1]))

            val, _ = integrate.quad(integrand, 0.0, seg.duration, epsabs=1e-14,
                                    epsrel=epsrel, limit=200)
            total += seg.euclid_speed * val
    return total


def sample_admissible(kind: str, n: int, seed: int, fp, cfg: ChainConfig = ChainConfig(),
                      lo: float = 1e-2, hi: float = 1e2):
    """Random pairs satisfying a chain's precondition and its case gate.

    characteristic: y <= y', 0 < |x| <= x' <= d/eps0;
    noncharacteristic: y <= y', x >= x' >= d/eps0.  Magnitudes are
    log-uniform in [lo, hi].  Returns an (n, 2, 2) array.
    """
    rng = np.random.default_rng(seed)
    out = []
    logu = lambda size: np.exp(rng.uniform(math.log(lo), math.log(hi), size))
    while len(out) < n:
        m = 4 * (n - len(out)) + 16
        y = logu(m) * rng.choice([-1.0, 1.0], m)
        x2 = logu(m)
        if kind == "characteristic":
            x = x2 * rng.uniform(-1.0, 1.0, m)
            dy = logu(m)
        elif kind == "noncharacteristic":
            # small offsets relative to x' so that most draws pass the gate
            x = x2 * (1.0 + cfg.eps0 * rng.uniform(0.0, 1.0, m) * np.exp(rng.uniform(-6.0, 0.0, m)))
            dy = x2 * (cfg.eps0 / 2.0) ** 2 * np.exp(rng.uniform(-8.0, 0.0, m))
        else:
            raise ValueError(f"unknown chain kind {kind!r}")
        for i in range(m):
            u, v = (x[i], y[i]), (x2[i], y[i] + dy[i])
            d = delta_plane(u, v)
            if kind == "characteristic":
                ok = x[i] != 0.0 and x2[i] <= d / cfg.eps0
            else:
                ok = x2[i] >= d / cfg.eps0
            if ok:
                out.append((u, v))
                if len(out) == n:
                    break
    return np.array(out, dtype=float)


# Frozen first-run bands for length/delta_plane at eps0 = 0.1 (observed about 9.4 and 4.8).
CHAIN_K = {"characteristic": 12.0, "noncharacteristic": 6.0}
CLOSURE_TOL = 1e-9
Z_TOL = 1e-12
ROOT_TOL = 1e-12


def chain_audit_batch(kind: str, n: int, seed: int, fp, cfg: ChainConfig = ChainConfig(),
                      K: float | None = None) -> dict:
    """Chain metrics over random admissible pairs of one kind (direct chains, no normalization).

    The length band K only applies at the default eps0, where it was frozen.
    """
    a = _alpha(fp)
    pairs = sample_admissible(kind, n, seed, a, cfg)
    build = char_chain if kind == "characteristic" else (lambda s, e, f: nonchar_chain(s, e, f, cfg))
    errs, zviol, ratios, resid = [], [], [], []
    for (u, v) in pairs:
        c = build(u, v, a)
        s = _scale(c.points)
        end = c.points[-1]
        errs.append(max(replay_error(c), max(abs(end.x - v[0]), abs(end.y - v[1]), abs(end.z)) / s))
        zviol.append(max(0.0, -min_z(c)) / s)
        ratios.append(c.length / delta_plane(u, v))
        resid.append(c.scalars.get("root_residual", 0.0) / (1.0 + c.scalars.get("z_prime", 0.0)))
    if K is None and cfg.eps0 == ChainConfig().eps0:
        K = CHAIN_K[kind]
    ok = max(errs) <= CLOSURE_TOL and max(zviol) <= Z_TOL and max(resid) <= ROOT_TOL
    if K is not None:
        ok = ok and max(ratios) <= K
    return {
        "alpha": a, "kind": kind, "n": int(n), "seed": int(seed), "eps0": cfg.eps0,
        "max_endpoint_err": float(max(errs)),
        "max_z_violation": float(max(zviol)),
        "max_length_over_delta": float(max(ratios)),
        "median_length_over_delta": float(np.median(ratios)),
        "max_root_residual": float(max(resid)),
        "K": K,
        "ok": bool(ok),
    }


# ---------------------------------------------------------------- monotonicity audits


def phi_fifa(x: float, h1: float, h2: float, t, fp):
    """Time change [sigma x^a + ((x-t)^(a+1) - x^(a+1))/(a+1)] / (x-t)^a, sigma = h2^2/x + h1."""
    a = _alpha(fp)
    t = np.asarray(t, dtype=float)
    sig = h2 * h2 / x + h1
    num = sig * x ** a + ((x - t) ** (a + 1.0) - x ** (a + 1.0)) / (a + 1.0)
    return num / (x - t) ** a


def phi_fifa_prime_plus_one(x: float, h1: float, h2: float, t, fp):
    """Closed form of phi' + 1 = a N(t) / (x-t)^(a+1), N the numerator of phi."""
    a = _alpha(fp)
    t = np.asarray(t, dtype=float)
    sig = h2 * h2 / x + h1
    num = sig * x ** a + ((x - t) ** (a + 1.0) - x ** (a + 1.0)) / (a + 1.0)
    return a * num / (x - t) ** (a + 1.0)


def z_hat(x2: float, h1: float, h2: float, fp) -> float:
    """h2^2 (x'+h1)^(a-1) + h1 (x'+h1)^a - ((x'+h1)^(a+1) - x'^(a+1))/(a+1), without cancellation."""
    a = _alpha(fp)
    w = x2 + h1
    return h2 * h2 * w ** (a - 1.0) + h1 * (w ** a - float(mean_abs_pow(x2, w, a)))


def tau_hat(x2: float, h1: float, h2: float, fp, tol: float = 1e-14) -> float:
    return tau_from_z(x2, z_hat(x2, h1, h2, fp), fp, tol)


def lemma_derivative(x2: float, h1: float, h2: float, fp) -> float:
    """d/dx' (x'^a tau_hat) by implicit differentiation of tau((x'+tau)^a - x'^a) = z_hat."""
    a = _alpha(fp)
    t = tau_hat(x2, h1, h2, a)
    w = x2 + h1
    dz = (h2 * h2 * (a - 1.0) * w ** (a - 2.0) if a != 1.0 else 0.0) \
        + h1 * a * w ** (a - 1.0) - (w ** a - x2 ** a)
    g_tau = (x2 + t) ** a - x2 ** a + a * t * (x2 + t) ** (a - 1.0)
    g_x = a * t * ((x2 + t) ** (a - 1.0) - x2 ** (a - 1.0)) - dz
    dtau = -g_x / g_tau if g_tau > 0.0 else 0.0
    return a * x2 ** (a - 1.0) * t + x2 ** a * dtau


@dataclass(frozen=True)
class MonotonicityGrid:
    """|h| = 1 (both audited quantities are homogeneous of degree 0)."""

    eps0s: tuple = (0.1, 0.05, 0.01)
    x_factors: tuple = (1.01, 1.5, 2.0, 4.0, 10.0)
    n_angles: int = 16
    t_max: float = 2.0
    n_t: int = 21
    fd_rel_step: float = 1e-5


def monotonicity_audits(fp, cfg: ChainConfig = ChainConfig(), grid: MonotonicityGrid = MonotonicityGrid()) -> dict:
    """Largest |phi' + 1| and |d/dx'(x'^a tau_hat)| / x'^a on the region |x| >= |h|/eps0.

    Derivatives are central finite differences; the closed forms are
    evaluated alongside and the worst disagreement is reported.  Angles of h
    cover the quadrant h1, h2 > 0 for the time change and the whole circle
    for the lemma quantity.
    """
    a = _alpha(fp)
    quad_angles = (np.arange(grid.n_angles) + 0.5) * (0.5 * math.pi / grid.n_angles)
    circle_angles = (np.arange(grid.n_angles) + 0.5) * (2.0 * math.pi / grid.n_angles)
    ts = np.linspace(0.0, grid.t_max, grid.n_t)
    rows = []
    fd_err = 0.0
    for eps in grid.eps0s:
        s_fifa = s_fifa_cf = s_lem = s_lem_cf = 0.0
        for fac in grid.x_factors:
            x = fac / eps
            eta = grid.fd_rel_step * x
            for th in quad_angles:
                h1, h2 = math.cos(th), math.sin(th)
                fd = (phi_fifa(x, h1, h2, ts + eta, a) - phi_fifa(x, h1, h2, ts - eta, a)) / (2.0 * eta)
                cf = phi_fifa_prime_plus_one(x, h1, h2, ts, a)
                s_fifa = max(s_fifa, float(np.max(np.abs(fd + 1.0))))
                s_fifa_cf = max(s_fifa_cf, float(np.max(np.abs(cf))))
                fd_err = max(fd_err, float(np.max(np.abs(fd + 1.0 - cf))))
            for th in circle_angles:
                h1, h2 = math.cos(th), math.sin(th)
                F = lambda s: s ** a * tau_hat(s, h1, h2, a)
                fd = (F(x + eta) - F(x - eta)) / (2.0 * eta)
                cf = lemma_derivative(x, h1, h2, a)
                s_lem = max(s_lem, abs(fd) / x ** a)
                s_lem_cf = max(s_lem_cf, abs(cf) / x ** a)
                fd_err = max(fd_err, abs(fd - cf) / x ** a)
        rows.append({"eps0": eps, "sigma_fifa": s_fifa, "sigma_fifa_closed": s_fifa_cf,
                     "sigma_lemma": s_lem, "sigma_lemma_closed": s_lem_cf})
    order = sorted(rows, key=lambda r: -r["eps0"])
    dec = lambda key: all(r1[key] < r0[key] for r0, r1 in zip(order[:-1], order[1:]))
    return {
        "alpha": a,
        "rows": rows,
        "fd_vs_closed_max": fd_err,
        "fifa_decreasing": dec("sigma_fifa"),
        "lemma_decreasing": dec("sigma_lemma"),
        "ok": dec("sigma_fifa") and dec("sigma_lemma"),
        "grid": {"eps0s": list(grid.eps0s), "x_factors": list(grid.x_factors),
                 "n_angles": grid.n_angles, "t_max": grid.t_max, "n_t": grid.n_t},
    }


__all__ = [
    "CaseLabel", "ChainConfig", "ChainSpec", "Plan", "Connection", "classify", "normalize",
    "char_chain", "nonchar_chain", "tau_nonchar", "tau_from_z", "z_prime_nonchar", "connect",
    "chain_audit", "chain_audit_batch", "sample_admissible", "gradient_line_integral",
    "replay_error", "min_z", "phi_fifa", "phi_fifa_prime_plus_one", "z_hat", "tau_hat",
    "lemma_derivative", "MonotonicityGrid", "monotonicity_audits", "CHAIN_K",
]
