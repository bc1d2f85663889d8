"""Both sides of the trace inequality for a test function f on z >= 0.

lhs  = int int |f(u) - f(v)|^p / (delta^(p-1) A(u, delta)) |x|^a |x'|^a du dv
       over pairs of the plane z = 0 with delta = delta_plane(u, v) >= delta_min,
       A the piecewise Ahlfors surrogate;
rhs  = int_{z >= 0} |Xf|^p, Xf = (X1 f, X2 f).

Both sides scale by r^(p-a-3) under f -> f o dilate_r, and every quantity
used here (support box, cutoff, sample positions, quadrature nodes) is
carried along exactly, so the ratio is dilation invariant up to rounding.

Monte Carlo design.  Pairs are drawn by two techniques combined with the
balance heuristic: an anchor from q1 (density ~ |x|^a on the support box,
reweighted cellwise toward where |f|^p is large) and a partner from q2(. | anchor), a scale mixture of rectangles
[x +- rho] x [y +- min(rho, rho^2/|x|)] shaped like delta-balls.  The scale
rho is log-uniform on [rho_lo, R0] (mass 0.7) with a Pareto tail beyond R0
of exponent (p-1)/2, which keeps the far-field contribution of finite
variance.  Technique 1 uses (u, v) = (anchor, partner), technique 2 the
reverse, and every pair is weighted by 1 / (q1(u) q2(v|u) + q1(v) q2(u|v)) / 2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import BesovParams, _alpha, abs_pow, delta_plane_arrays
from .fields import ScalarField, x_gradient_arrays
from .flows import abs_pow_antiderivative
from .geometry import MeasureEstimate

_Z95 = 1.959963984540054
BATCH = 1 << 15
LOG_MASS = 0.7


@dataclass(frozen=True)
class TraceConfig:
    samples: int = 200_000
    seed: int = 0
    delta_min_rel: float = 1e-3
    halvings: int = 2
    panels: int = 8
    gl_order: int = 8
    rhs_rtol: float = 5e-3

    def __post_init__(self):
        if self.samples < 4:
            raise ValueError("samples must be >= 4")
        if not self.delta_min_rel > 0.0:
            raise ValueError("delta_min_rel must be > 0")
        if self.panels < 1 or self.gl_order < 1:
            raise ValueError("panels and gl_order must be >= 1")


@dataclass
class QuadResult:
    value: float
    error: float
    converged: bool
    nodes: int


@dataclass
class BesovEstimate:
    estimate: MeasureEstimate
    delta_min: float
    cutoffs: list
    cutoff_values: list
    cutoff_changes: list
    converged: bool


@dataclass
class TraceReport:
    lhs: MeasureEstimate
    rhs: float
    rhs_error: float
    ratio: float
    ratio_half_width: float
    degenerate: bool
    inconclusive: bool
    cutoff_study: dict
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lhs"] = asdict(self.lhs)
        return d


# ---------------------------------------------------------------- rhs


def _panel_nodes(lo: float, hi: float, n_panels: int, order: int, breaks=()):
    """Composite Gauss-Legendre nodes and weights on [lo, hi] with extra breakpoints."""
    edges = np.linspace(lo, hi, n_panels + 1)
    extra = [b for b in breaks if lo < b < hi]
    edges = np.unique(np.concatenate([edges, extra]))
    gx, gw = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * gx
    weights = 0.5 * (b - a) * gw
    return nodes.ravel(), weights.ravel()


def _energy_at(f: ScalarField, a: float, p: float, n_panels: int, order: int) -> tuple[float, int]:
    cx, cy, _ = f.center
    hx, hy, _ = f.half_width
    z0, z1 = f.z_range
    xs, wx = _panel_nodes(cx - hx, cx + hx, n_panels, order, breaks=(0.0,))
    ys, wy = _panel_nodes(cy - hy, cy + hy, n_panels, order)
    zs, wz = _panel_nodes(z0, z1, n_panels, order)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = wx[:, None] * wy[None, :]
    total = 0.0
    for z, w in zip(zs, wz):
        P = np.stack([X, Y, np.full_like(X, z)], axis=-1)
        g = x_gradient_arrays(f, P, a)
        total += w * float(np.sum(W * np.hypot(g[..., 0], g[..., 1]) ** p))
    return total, len(xs) * len(ys) * len(zs)


def sobolev_energy(f: ScalarField, fp, bp, cfg: TraceConfig = TraceConfig()) -> QuadResult:
    """int |Xf|^p over the support box (clipped to z >= 0).

    Composite Gauss-Legendre in each variable with a break at x = 0; the
    panel count doubles once and the difference between the two levels is
    the error estimate.
    """
    a = _alpha(fp)
    bp = bp if isinstance(bp, BesovParams) else BesovParams(bp)
    coarse, _ = _energy_at(f, a, bp.p, cfg.panels, cfg.gl_order)
    fine, n = _energy_at(f, a, bp.p, 2 * cfg.panels, cfg.gl_order)
    err = abs(fine - coarse)
    return QuadResult(fine, err, err <= cfg.rhs_rtol * abs(fine) or fine == 0.0, n)


# ---------------------------------------------------------------- lhs


def _surrogate_arrays(x_abs, r, a: float):
    return np.where(x_abs >= r, r ** 3 * x_abs ** (a - 1.0), r ** (a + 2.0))


class _Proposal:
    """Anchor density q1 and partner kernel q2(. | anchor).

    q1 mixes the density ~ |x|^a on the support rectangle (mass DEFENSIVE)
    with a piecewise one ~ |x|^a times the largest |f|^p seen in each cell of
    a GRID x GRID partition, so anchors concentrate where f lives.
    """

    GRID = 64
    DEFENSIVE = 0.2

    def __init__(self, f: ScalarField, a: float, p: float, rho_lo: float):
        self.a = a
        cx, cy, _ = f.center
        hx, hy, _ = f.half_width
        self.x_lo, self.x_hi = cx - hx, cx + hx
        self.y_lo, self.y_hi = cy - hy, cy + hy
        F = lambda t: abs_pow_antiderivative(t, a)
        self.F_lo = float(F(self.x_lo))
        self.F_hi = float(F(self.x_hi))
        self.norm = (self.F_hi - self.F_lo) * (self.y_hi - self.y_lo)

        n = self.GRID
        self.xe = np.linspace(self.x_lo, self.x_hi, n + 1)
        self.ye = np.linspace(self.y_lo, self.y_hi, n + 1)
        self.Fe = F(self.xe)
        mass_x = np.diff(self.Fe)
        dy = np.diff(self.ye)
        probe = (np.arange(3) + 0.5) / 3.0
        px = self.xe[:-1, None] + np.diff(self.xe)[:, None] * probe
        py = self.ye[:-1, None] + dy[:, None] * probe
        PX = px[:, None, :, None] * np.ones((1, n, 1, 3))
        PY = py[None, :, None, :] * np.ones((n, 1, 3, 1))
        P = np.stack([PX, PY, np.zeros_like(PX)], axis=-1)
        peak = np.max(np.abs(f.value(P)) ** p, axis=(2, 3))
        w = mass_x[:, None] * dy[None, :] * peak
        total = float(w.sum())
        self.adaptive = total > 0.0 and np.isfinite(total)
        if self.adaptive:
            self.cell_p = (w / total).ravel()
            self.cell_cdf = np.cumsum(self.cell_p)
            self.cell_cdf[-1] = 1.0
            self.cell_mass = (mass_x[:, None] * dy[None, :]).ravel()

        self.rho_lo = rho_lo
        self.R0 = 2.0 * max(hx, hy)
        self.beta = (p - 1.0) / 2.0
        self.c_log = LOG_MASS / math.log(self.R0 / rho_lo)
        self.c_tail = (1.0 - LOG_MASS) * self.beta * self.R0 ** self.beta

    def _invert_F(self, w):
        return np.sign(w) * ((self.a + 1.0) * np.abs(w)) ** (1.0 / (self.a + 1.0))

    def sample_anchor(self, rng, m):
        w = self.F_lo + rng.uniform(size=m) * (self.F_hi - self.F_lo)
        x = self._invert_F(w)
        y = rng.uniform(self.y_lo, self.y_hi, size=m)
        if not self.adaptive:
            return x, y
        pick = rng.uniform(size=m) >= self.DEFENSIVE
        c = np.minimum(np.searchsorted(self.cell_cdf, rng.uniform(size=m), side="right"), len(self.cell_p) - 1)
        i, j = np.divmod(c, self.GRID)
        wc = self.Fe[i] + rng.uniform(size=m) * (self.Fe[i + 1] - self.Fe[i])
        xc = self._invert_F(wc)
        yc = self.ye[j] + rng.uniform(size=m) * (self.ye[j + 1] - self.ye[j])
        return np.where(pick, xc, x), np.where(pick, yc, y)

    def q1(self, x, y):
        inside = (x >= self.x_lo) & (x <= self.x_hi) & (y >= self.y_lo) & (y <= self.y_hi)
        xa = abs_pow(x, self.a)
        base = np.where(inside, xa / self.norm, 0.0)
        if not self.adaptive:
            return base
        i = np.clip(np.searchsorted(self.xe, x, side="right") - 1, 0, self.GRID - 1)
        j = np.clip(np.searchsorted(self.ye, y, side="right") - 1, 0, self.GRID - 1)
        c = i * self.GRID + j
        adapt = np.where(inside, self.cell_p[c] * xa / self.cell_mass[c], 0.0)
        return self.DEFENSIVE * base + (1.0 - self.DEFENSIVE) * adapt

    def sample_rho(self, rng, m):
        # stratified uniforms, randomly permuted
        u = (rng.permutation(m) + rng.uniform(size=m)) / m
        log_part = self.rho_lo * (self.R0 / self.rho_lo) ** (u / LOG_MASS)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = self.R0 * ((1.0 - u) / (1.0 - LOG_MASS)) ** (-1.0 / self.beta)
        return np.where(u < LOG_MASS, log_part, tail)

    def sample_partner(self, rng, xa, ya):
        m = len(xa)
        rho = self.sample_rho(rng, m)
        X = np.abs(xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(rho < X, rho * rho / X, rho)
        s = rng.uniform(-1.0, 1.0, size=(m, 2))
        return xa + rho * s[:, 0], ya + w * s[:, 1]

    def q2(self, xv, yv, xa, ya):
        """int_{rho >= rho_box} g(rho) / area(rho) d rho in closed form."""
        X = np.abs(xa)
        dx, dy = np.abs(xv - xa), np.abs(yv - ya)
        L = np.maximum(np.maximum(dx, dy), np.sqrt(X * dy))
        L = np.maximum(L, self.rho_lo)
        b = self.beta
        # (lo, hi, coefficient, exponent k) with integrand C rho^-k
        pieces = (
            (self.rho_lo, np.minimum(X, self.R0), self.c_log * X / 4.0, 4.0),
            (np.maximum(X, self.rho_lo), self.R0, self.c_log / 4.0, 3.0),
            (self.R0, np.maximum(X, self.R0), self.c_tail * X / 4.0, b + 4.0),
            (np.maximum(X, self.R0), np.inf, self.c_tail / 4.0, b + 3.0),
        )
        total = np.zeros_like(L)
        for lo, hi, C, k in pieces:
            lo = np.maximum(L, lo)
            hi = np.broadcast_to(hi, lo.shape)
            ok = hi > lo
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                val = C * (lo ** (1.0 - k) - np.where(np.isinf(hi), 0.0, hi ** (1.0 - k))) / (k - 1.0)
            total += np.where(ok, val, 0.0)
        return total


def besov_seminorm(f: ScalarField, fp, bp, cfg: TraceConfig = TraceConfig()) -> BesovEstimate:
    """Monte Carlo estimate of the lhs with a cutoff study.

    The estimate is reported at delta_min = delta_min_rel * max(half-widths);
    the same samples are re-weighted at delta_min / 2^k, k = 1..halvings,
    and the study converges when every successive change is below the 95%
    half-width of the reported estimate.
    """
    a = _alpha(fp)
    bp = bp if isinstance(bp, BesovParams) else BesovParams(bp)
    p = bp.p
    scale = max(f.half_width[0], f.half_width[1])
    delta_min = cfg.delta_min_rel * scale
    cutoffs = [delta_min / 2.0 ** k for k in range(cfg.halvings + 1)]
    prop = _Proposal(f, a, p, cutoffs[-1] / 4.0)

    n_half = cfg.samples // 2
    sums = np.zeros((2, len(cutoffs)))
    sumsq = np.zeros((2, len(cutoffs)))
    for tech, tseed in enumerate(np.random.SeedSequence(cfg.seed).spawn(2)):
        n_batches = -(-n_half // BATCH)
        for k, child in enumerate(tseed.spawn(n_batches)):
            m = min(BATCH, n_half - k * BATCH)
            rng = np.random.default_rng(child)
            xa, ya = prop.sample_anchor(rng, m)
            xb, yb = prop.sample_partner(rng, xa, ya)
            (xu, yu), (xv, yv) = ((xa, ya), (xb, yb)) if tech == 0 else ((xb, yb), (xa, ya))
            dens = 0.5 * (prop.q1(xu, yu) * prop.q2(xv, yv, xu, yu)
                          + prop.q1(xv, yv) * prop.q2(xu, yu, xv, yv))
            U = np.stack([xu, yu, np.zeros(m)], axis=-1)
            V = np.stack([xv, yv, np.zeros(m)], axis=-1)
            d = delta_plane_arrays(U[:, :2], V[:, :2])
            diff = np.abs(f.value(U) - f.value(V)) ** p
            xu_abs = np.abs(xu)
            with np.errstate(divide="ignore", invalid="ignore"):
                kern = diff / (d ** (p - 1.0) * _surrogate_arrays(xu_abs, d, a))
                F = kern * abs_pow(xu, a) * abs_pow(xv, a) / dens
            F = np.where((d > 0.0) & (dens > 0.0), F, 0.0)
            for j, c in enumerate(cutoffs):
                Fc = np.where(d >= c, F, 0.0)
                sums[tech, j] += float(np.sum(Fc))
                sumsq[tech, j] += float(np.sum(Fc * Fc))
    n = 2 * n_half
    means = sums / n_half
    var_t = np.maximum(sumsq / n_half - means ** 2, 0.0) * n_half / max(n_half - 1, 1)
    values = sums.sum(axis=0) / n
    hws = _Z95 * np.sqrt(var_t.sum(axis=0) * n_half) / n
    est = MeasureEstimate(float(values[0]), float(hws[0]), n, cfg.seed)
    changes = [float(abs(values[j + 1] - values[j])) for j in range(len(cutoffs) - 1)]
    converged = all(c < est.half_width for c in changes) if est.half_width > 0 else all(c == 0 for c in changes)
    return BesovEstimate(est, delta_min, cutoffs, [float(v) for v in values], changes, converged)


def trace_ratio(f: ScalarField, fp, bp, cfg: TraceConfig = TraceConfig()) -> TraceReport:
    """lhs / rhs with CI; 0/0 gives ratio 0 flagged degenerate.

    rhs = 0 with lhs > 0 cannot happen for C^1 fields and raises.
    """
    a = _alpha(fp)
    bp = bp if isinstance(bp, BesovParams) else BesovParams(bp)
    lhs = besov_seminorm(f, a, bp, cfg)
    rhs = sobolev_energy(f, a, bp, cfg)
    est = lhs.estimate
    degenerate = rhs.value == 0.0
    if degenerate and est.value - est.half_width > 0.0:
        raise RuntimeError(f"rhs vanishes while lhs = {est.value} +- {est.half_width}")
    ratio = 0.0 if degenerate else est.value / rhs.value
    ratio_hw = 0.0 if degenerate else est.half_width / rhs.value
    study = {"delta_min": lhs.delta_min, "cutoffs": lhs.cutoffs, "values": lhs.cutoff_values,
             "changes": lhs.cutoff_changes, "converged": lhs.converged,
             "rhs_converged": rhs.converged, "rhs_nodes": rhs.nodes}
    inconclusive = not (lhs.converged and rhs.converged)
    conf = {"alpha": a, "p": bp.p, "s": bp.s, "field": f.name, **asdict(cfg)}
    return TraceReport(est, rhs.value, rhs.error, ratio, ratio_hw, degenerate, inconclusive, study, conf)


__all__ = [
    "TraceConfig", "QuadResult", "BesovEstimate", "TraceReport", "sobolev_energy",
    "besov_seminorm", "trace_ratio",
]
