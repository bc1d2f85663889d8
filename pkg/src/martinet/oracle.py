"""Numerical brackets for the Carnot-Caratheodory distance d.

d is the infimum of Euclidean control length |(h1, h2)| over horizontal
curves.  The bracket is

* lower: a bound valid for every horizontal curve (derivation below);
* upper: the length of an explicit horizontal path (the witness) that hits
  the target, built constructively or by derivative-free search over
  piecewise-linear planar curves closed up with an exact square loop.

Lower bound derivation.  Translate so that p = (x, 0, 0) and let gamma be a
horizontal curve of duration T with |h1|, |h2| <= 1 (implied by the
Euclidean constraint), so |x(s) - x| <= s and |y'| <= T, |x' - x| <= T.
Along gamma, z(T) - z(0) = int |x(s)|^a y'(s) ds, hence

    zeta = |x|^a y' - z' = -int_0^T (|x(s)|^a - |x|^a) y'(s) ds.

For a >= 1 and reals b, c the mean value theorem gives
| |b|^a - |c|^a | <= a max(|b|, |c|)^(a-1) | |b| - |c| |.  With b = x(s),
c = x: max(|b|, |c|) <= |x| + s and | |b| - |c| | <= s, so

    |zeta| <= int_0^T a (|x| + s)^(a-1) s ds <= a (|x| + T)^(a-1) T^2 / 2.

The right side is increasing in T, so T >= T*, its unique root at |zeta|.
Together with the two planar bounds, d >= max{|x - x'|, |y - y'|, T*}.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    FrameParams, SpacePoint, _alpha, abs_pow, delta, delta_arrays, zeta as zeta_fn,
)
from .flows import (
    ControlSegment, HorizontalPath, flow, mean_abs_pow, path_length, polyline_z_gain,
    square_loop_path,
)
from .roots import expand_bracket, solve_increasing

# Frozen band for equivalence_audit: upper/delta <= K and delta/lower <= K.
# First-run regression values; the worst observed ratios were about 3.6.
EQUIVALENCE_K = {1.0: 5.0, 1.5: 5.0, 2.0: 5.0, 3.0: 5.0}
DEFAULT_K = 5.0


def equivalence_k(alpha: float) -> float:
    return EQUIVALENCE_K.get(float(alpha), DEFAULT_K)


@dataclass(frozen=True)
class OracleConfig:
    segments: int = 8
    starts: int = 16
    seed: int = 0
    tol: float = 1e-3
    max_iter: int = 4000
    threads: int = 1

    def __post_init__(self):
        if self.segments < 1:
            raise ValueError("segments must be >= 1")
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if not self.tol > 0.0:
            raise ValueError("tol must be > 0")


@dataclass
class UpperResult:
    value: float
    witness: HorizontalPath
    certified: bool
    method: str
    vertices: np.ndarray | None = None
    endpoint_error: float = 0.0


@dataclass
class DistanceBracket:
    lower: float
    upper: float
    witness: HorizontalPath
    certified: bool = True
    endpoint_error: float = 0.0


# ---------------------------------------------------------------- lower bound


def _lower_majorant_root(x_abs: float, zeta_abs: float, a: float) -> float:
    if zeta_abs == 0.0:
        return 0.0
    g = lambda t: a * (x_abs + t) ** (a - 1.0) * t * t / 2.0
    hi = (2.0 * zeta_abs / a) ** (1.0 / (a + 1.0))
    if x_abs > 0.0:
        hi = min(hi, math.sqrt(2.0 * zeta_abs / (a * x_abs ** (a - 1.0))))
    # hi is exact in real arithmetic; roundoff may leave g(hi) an ulp short
    hi = expand_bracket(g, zeta_abs, hi)
    return solve_increasing(g, zeta_abs, 0.0, hi)


def cc_lower(p, q, fp) -> float:
    a = _alpha(fp)
    p, q = SpacePoint.of(p), SpacePoint.of(q)
    t_star = _lower_majorant_root(abs(p.x), abs(zeta_fn(p, q, a)), a)
    return max(abs(q.x - p.x), abs(q.y - p.y), t_star)


# ---------------------------------------------------------------- upper bound


def _endpoint_error(path: HorizontalPath, q: SpacePoint, fp) -> float:
    e = path.end(fp)
    return max(abs(e.x - q.x), abs(e.y - q.y), abs(e.z - q.z))


def constructive_upper(p, q, fp) -> UpperResult:
    """Straight horizontal flow plus one square loop for the vertical residual.

    Two orders are tried (loop at the end, loop at the start) and the shorter
    path is returned.
    """
    a = _alpha(fp)
    p, q = SpacePoint.of(p), SpacePoint.of(q)
    dx, dy = q.x - p.x, q.y - p.y
    straight = ControlSegment(dx, dy, 1.0) if (dx or dy) else None
    flow_path = HorizontalPath(p, (straight,) if straight else ())

    w = flow_path.end(a)
    loop_end = square_loop_path(w, q.z - w.z, a)
    cand_end = flow_path.then(loop_end)

    loop_start = square_loop_path(p, q.z - w.z, a)
    cand_start = HorizontalPath(p, loop_start.segments + flow_path.segments)

    best = None
    for name, cand in (("flow+loop", cand_end), ("loop+flow", cand_start)):
        length = path_length(cand)["euclid_norm_length"]
        if best is None or length < best.value:
            best = UpperResult(length, cand, True, name)
    best.endpoint_error = _endpoint_error(best.witness, q, a)
    return best


def _loop_side_batch(gain, x_abs: float, a: float):
    """Vectorized inverse of u -> u((x+u)^a - x^a) by Newton from above.

    The map is convex and increasing with value 0 at 0, so Newton started at
    an upper bound decreases monotonically to the root.
    """
    gain = np.asarray(gain, dtype=float)
    u = gain ** (1.0 / (a + 1.0))
    if x_abs > 0.0:
        u = np.minimum(u, np.sqrt(gain / (a * x_abs ** (a - 1.0))))
    xa = x_abs ** a
    for _ in range(60):
        xu = x_abs + u
        g = u * (xu ** a - xa) - gain
        dg = xu ** a - xa + a * u * xu ** (a - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg > 0.0, g / dg, 0.0)
        u_new = np.maximum(u - step, 0.0)
        if np.all(np.abs(u_new - u) <= 1e-15 * (1.0 + u)):
            u = u_new
            break
        u = u_new
    return np.where(gain > 0.0, u, 0.0)


def _project_to_target(V, z_target: float, a: float, m=None):
    """Shift interior y-coordinates so the lift ends exactly at height ``z_target``.

    For fixed x-coordinates the lift's height gain sum_k m_k (y_{k+1} - y_k),
    m_k the mean of |x|^a over edge k, is linear in the interior y's with
    gradient c_j = m_{j-1} - m_j; the minimal-norm correction along c closes
    the gap exactly.  Where c vanishes the polyline is returned unchanged.
    """
    V = np.array(V, dtype=float, copy=True)
    if m is None:
        m = mean_abs_pow(V[..., :-1, 0], V[..., 1:, 0], a)
    gain = np.sum(m * np.diff(V[..., 1], axis=-1), axis=-1)
    c = m[..., :-1] - m[..., 1:]
    cc = np.sum(c * c, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(cc > 0.0, (z_target - gain) / cc, 0.0)
    V[..., 1:-1, 1] += t[..., None] * c
    return V


def _polyline_cost(V, z_target: float, a: float):
    """Length of the projected polyline plus the perimeter of a closing square loop.

    ``V`` has shape (..., n+1, 2).  After projection the loop only absorbs
    the whole gap when the projection is degenerate, so every evaluated
    candidate is a feasible horizontal path and its cost is itself an upper
    bound on d.
    """
    m = mean_abs_pow(V[..., :-1, 0], V[..., 1:, 0], a)
    V = _project_to_target(V, z_target, a, m)
    seg = np.diff(V, axis=-2)
    length = np.sum(np.hypot(seg[..., 0], seg[..., 1]), axis=-1)
    terms = m * seg[..., 1]
    resid = np.abs(z_target - np.sum(terms, axis=-1))
    # Residuals at roundoff level are not real gaps; a loop for them would
    # inject root-sized noise into the cost.
    floor = 1e-12 * (1.0 + abs(z_target) + np.sum(np.abs(terms), axis=-1))
    resid = np.where(resid <= floor, 0.0, resid)
    x_end = abs(float(V.reshape(-1, V.shape[-2], 2)[0, -1, 0]))
    return length + 4.0 * _loop_side_batch(resid, x_end, a)


def _refine_polyline(V: np.ndarray, n: int) -> np.ndarray:
    """Split the longest edges at midpoints until the polyline has ``n`` edges."""
    V = [np.asarray(v, dtype=float) for v in V]
    while len(V) - 1 < n:
        lengths = [np.hypot(*(V[i + 1] - V[i])) for i in range(len(V) - 1)]
        i = int(np.argmax(lengths))
        V.insert(i + 1, 0.5 * (V[i] + V[i + 1]))
    return np.array(V)


def _compass_search(V0: np.ndarray, z_target: float, a: float, step0, cfg: OracleConfig,
                    window: int = 60, cull: float = 1.5):
    """Batched derivative-free coordinate search on the interior vertices.

    ``V0`` is (S, n+1, 2); endpoints stay fixed.  Each iteration polls +-step
    along every interior coordinate for all live starts at once, moves to the
    best improving poll point, or halves the step when none improves.  A start
    stops when its step drops below ``cfg.tol``, when it improved by less than
    ``cfg.tol`` (relative) over the last ``window`` iterations, or when it sits
    above ``cull`` times the best cost after ``window`` iterations.  Returns
    (V, J, converged) where converged is False only for starts cut off by
    ``cfg.max_iter``.
    """
    S, n1, _ = V0.shape
    V = V0.copy()
    J = _polyline_cost(V, z_target, a)
    step = np.full(S, float(step0))
    converged = np.ones(S, dtype=bool)
    if n1 - 2 <= 0:
        return V, J, converged
    m = 2 * (n1 - 2)
    dirs = np.zeros((2 * m, n1, 2))
    k = 0
    for i in range(1, n1 - 1):
        for c in range(2):
            dirs[k, i, c] = 1.0
            dirs[k + 1, i, c] = -1.0
            k += 2
    active = np.ones(S, dtype=bool)
    history = [J.copy()]
    for it in range(1, cfg.max_iter + 1):
        idx = np.flatnonzero(active)
        cand = V[idx, None, :, :] + step[idx, None, None, None] * dirs[None]
        Jc = _polyline_cost(cand, z_target, a)
        best = np.argmin(Jc, axis=1)
        Jb = Jc[np.arange(len(idx)), best]
        improved = Jb < J[idx] - 1e-13 * (1.0 + np.abs(J[idx]))
        acc = idx[improved]
        V[acc] = cand[np.flatnonzero(improved), best[improved]]
        J[acc] = Jb[improved]
        step[idx[~improved]] *= 0.5
        active &= step >= cfg.tol
        history.append(J.copy())
        if it >= window:
            old = history[-window - 1]
            stalled = old - J <= cfg.tol * (1.0 + np.abs(J))
            dominated = J > cull * J.min()
            active &= ~(stalled | dominated)
            history.pop(0)
        if not active.any():
            break
    converged &= ~active
    return V, J, converged


def _normalizer(p: SpacePoint, q: SpacePoint, a: float):
    """Map (p, q) to p~ = (x, 0, 0) with x >= 0 and delta(p~, q~) = 1.

    Uses the y/z translations, the reflection in x and the dilations, all of
    which preserve d exactly.  Returns (r, sign, qn) plus the inverse map for
    planar vertices.
    """
    total = delta(p, q, a).total
    r = 1.0 / total
    sgn = -1.0 if (p.x < 0.0 or (p.x == 0.0 and q.x < 0.0)) else 1.0
    pn = np.array([sgn * p.x * r, 0.0, 0.0])
    qn = np.array([sgn * q.x * r, (q.y - p.y) * r, (q.z - p.z) * r ** (a + 1.0)])

    def to_original(V):
        V = np.asarray(V, dtype=float)
        out = np.empty_like(V)
        out[..., 0] = sgn * V[..., 0] / r
        out[..., 1] = V[..., 1] / r + p.y
        return out

    def to_normal(V):
        V = np.asarray(V, dtype=float)
        out = np.empty_like(V)
        out[..., 0] = sgn * V[..., 0] * r
        out[..., 1] = (V[..., 1] - p.y) * r
        return out

    return r, pn, qn, to_original, to_normal


def _witness_from_vertices(p: SpacePoint, q: SpacePoint, V: np.ndarray, a: float) -> HorizontalPath:
    segs = []
    for (x0, y0), (x1, y1) in zip(V[:-1], V[1:]):
        length = math.hypot(x1 - x0, y1 - y0)
        if length > 0.0:
            segs.append(ControlSegment((x1 - x0) / length, (y1 - y0) / length, length))
    path = HorizontalPath(p, tuple(segs))
    w = path.end(a)
    length = path_length(path)["euclid_norm_length"]
    if abs(q.z - w.z) <= 1e-11 * (1.0 + length):
        return path
    loop = square_loop_path(SpacePoint(q.x, q.y, w.z), q.z - w.z, a)
    return HorizontalPath(p, tuple(segs) + loop.segments)


def optimize_upper(p, q, fp, cfg: OracleConfig = OracleConfig(), warm=None) -> UpperResult:
    """Multi-start compass search over ``cfg.segments``-edge planar polylines.

    ``warm`` may be planar vertices (original coordinates) of a previous
    witness with at most ``cfg.segments`` edges; it is refined by midpoint
    splits and used as an extra start, so refining never loses ground.
    """
    a = _alpha(fp)
    p, q = SpacePoint.of(p), SpacePoint.of(q)
    n = cfg.segments
    r, pn, qn, to_original, to_normal = _normalizer(p, q, a)
    P0, PN = pn[:2], qn[:2]
    z_target = qn[2]

    ts = np.linspace(0.0, 1.0, n + 1)[:, None]
    line = P0 + ts * (PN - P0)

    starts = [line]
    cons = constructive_upper(SpacePoint(*pn), SpacePoint(*qn), a)
    cons_V = [pn[:2]]
    for pt in cons.witness.waypoints(a)[1:]:
        cons_V.append(np.array([pt.x, pt.y]))
    cons_V = np.array(cons_V)
    if len(cons_V) - 1 <= n:
        cons_V[-1] = PN
        starts.append(_refine_polyline(cons_V, n))
    if warm is not None:
        W = to_normal(np.asarray(warm, dtype=float))
        if len(W) - 1 <= n:
            W[0], W[-1] = P0, PN
            starts.append(_refine_polyline(W, n))
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.starts)
    for child in children[: max(cfg.starts - len(starts), 0)]:
        rng = np.random.default_rng(child)
        sigma = rng.uniform(0.1, 1.0)
        V = line + rng.normal(0.0, sigma, size=line.shape)
        V[0], V[-1] = P0, PN
        starts.append(V)
    V0 = np.array(starts)

    V, J, conv = _compass_search(V0, z_target, a, 0.25, cfg)
    i = int(np.argmin(J))
    Vbest = to_original(_project_to_target(V[i], z_target, a))
    Vbest[0] = (p.x, p.y)
    Vbest[-1] = (q.x, q.y)
    witness = _witness_from_vertices(p, q, Vbest, a)
    value = path_length(witness)["euclid_norm_length"]
    res = UpperResult(value, witness, bool(conv[i]), "compass", Vbest)
    res.endpoint_error = _endpoint_error(witness, q, a)
    return res


def cc_upper(p, q, fp, cfg: OracleConfig = OracleConfig(), warm=None) -> UpperResult:
    """Best of the constructive path and the optimized polyline paths."""
    a = _alpha(fp)
    p, q = SpacePoint.of(p), SpacePoint.of(q)
    if p == q:
        return UpperResult(0.0, HorizontalPath(p, ()), True, "trivial", np.array([[p.x, p.y]]))
    cons = constructive_upper(p, q, a)
    opt = optimize_upper(p, q, a, cfg, warm=warm)
    best = opt if opt.value < cons.value else cons
    if best is cons:
        # Keep the optimizer's vertices so a refinement can warm-start from them.
        best.vertices = opt.vertices if opt.value <= cons.value + 1e-12 else None
        best.certified = True
    if best.endpoint_error > 1e-8 * (1.0 + best.value):
        best.certified = False
    return best


def cc_bracket(p, q, fp, cfg: OracleConfig = OracleConfig()) -> DistanceBracket:
    a = _alpha(fp)
    lo = cc_lower(p, q, a)
    up = cc_upper(p, q, a, cfg)
    if lo > up.value:
        raise AssertionError(f"bracket inverted: lower={lo} > upper={up.value}")
    return DistanceBracket(lo, up.value, up.witness, up.certified, up.endpoint_error)


# ---------------------------------------------------------------- audit


def sample_pairs(n: int, seed: int, lo: float = 1e-2, hi: float = 1e2):
    """Pairs with log-uniform coordinate magnitudes in [lo, hi] and random signs."""
    rng = np.random.default_rng(seed)
    mag = np.exp(rng.uniform(math.log(lo), math.log(hi), size=(n, 2, 3)))
    sign = rng.choice([-1.0, 1.0], size=(n, 2, 3))
    return mag * sign


def _audit_one(args):
    P, Q, a, cfg = args
    p, q = SpacePoint(*P), SpacePoint(*Q)
    d = delta(p, q, a).total
    lo = cc_lower(p, q, a)
    up = cc_upper(p, q, a, cfg)
    return d, lo, up.value, up.certified, up.endpoint_error


def equivalence_audit(fp, n_pairs: int, seed: int = 0, cfg: OracleConfig = OracleConfig(),
                      pairs=None, K: float | None = None) -> dict:
    """Compare the bracket with delta on sampled pairs.

    Reports quantiles of upper/delta and lower/delta, and flags pairs where
    the bracket is inverted or upper/delta > K or delta/lower > K.
    """
    a = _alpha(fp)
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    K = equivalence_k(a) if K is None else float(K)
    if pairs is None:
        pairs = sample_pairs(n_pairs, seed)
    pairs = np.asarray(pairs, dtype=float)[:n_pairs]
    jobs = [(P, Q, a, cfg) for P, Q in pairs]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            rows = list(ex.map(_audit_one, jobs))
    else:
        rows = [_audit_one(j) for j in jobs]
    d, lo, up, cert, err = (np.array(c) for c in zip(*rows))
    upper_ratio = up / d
    lower_ratio = lo / d
    qs = [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0]

    def summary(v):
        return {"min": float(v.min()), "max": float(v.max()),
                "quantiles": {str(k): float(np.quantile(v, k)) for k in qs}}

    inverted = int(np.sum(lo > up * (1.0 + 1e-12)))
    band_violations = int(np.sum((upper_ratio > K) | (1.0 / lower_ratio > K)))
    return {
        "alpha": a,
        "n_pairs": int(len(pairs)),
        "seed": int(seed),
        "K": K,
        "upper_over_delta": summary(upper_ratio),
        "lower_over_delta": summary(lower_ratio),
        "bracket_inversions": inverted,
        "band_violations": band_violations,
        "non_certified": int(np.sum(~cert.astype(bool))),
        "max_endpoint_error": float(err.max()),
        "config": asdict(cfg),
        "ok": inverted == 0 and band_violations == 0,
    }
