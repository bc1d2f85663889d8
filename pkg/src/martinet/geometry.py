"""Ball-box maps, box and delta-ball volumes, perimeter measure of balls, Ahlfors audit.

"Ball" always means the delta-ball {q : delta(p, q).total < r}.  Monte Carlo
estimates draw fixed-size batches from per-batch RNG streams spawned from the
seed and reduce them in batch order, so results depend only on (n, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import SpacePoint, SurfacePoint, _alpha, abs_pow, delta_arrays, delta_max_form, vertical_term
from .flows import abs_pow_antiderivative
from .roots import expand_bracket, solve_increasing

_Z95 = 1.959963984540054
BATCH = 1 << 15
SHAPES = ("ball", "box1", "box2")


@dataclass(frozen=True)
class BoxSpec:
    variant: int
    center: SpacePoint
    r: float

    def __post_init__(self):
        if self.variant not in (1, 2):
            raise ValueError(f"variant must be 1 or 2, got {self.variant!r}")
        r = float(self.r)
        if not (math.isfinite(r) and r > 0.0):
            raise ValueError(f"box radius must be > 0, got {self.r!r}")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "center", SpacePoint.of(self.center))


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    half_width: float
    n_samples: int
    seed: int | None = None

    @property
    def rel_half_width(self) -> float:
        return self.half_width / abs(self.value) if self.value else math.inf


def _check_variant1(box: BoxSpec):
    if box.variant == 1 and box.center.x == 0.0:
        raise ValueError("variant-1 box needs center.x != 0")


def _positive_radius(r) -> float:
    r = float(r)
    if not (math.isfinite(r) and r > 0.0):
        raise ValueError(f"radius must be > 0, got {r!r}")
    return r


# ---------------------------------------------------------------- boxes


def phi(variant: int, p, u, fp) -> SpacePoint:
    """Ball-box coordinates: (x+u1, y+u2, z + |x|^a u2 + c u3), c = |x|^(a-1) or 1."""
    a = _alpha(fp)
    p = SpacePoint.of(p)
    u1, u2, u3 = (float(c) for c in u)
    if variant not in (1, 2):
        raise ValueError(f"variant must be 1 or 2, got {variant!r}")
    c = abs(p.x) ** (a - 1.0) if variant == 1 else 1.0
    return SpacePoint(p.x + u1, p.y + u2, p.z + abs(p.x) ** a * u2 + c * u3)


def _box_mask(center, Q, r: float, variant: int, a: float):
    """Vectorized membership of rows of Q in B_variant(center, r)."""
    c = np.asarray(tuple(center), dtype=float)
    Q = np.asarray(Q, dtype=float)
    u1 = Q[..., 0] - c[0]
    u2 = Q[..., 1] - c[1]
    zeta = c[2] - Q[..., 2] + abs_pow(c[0], a) * u2
    if variant == 1:
        u3 = -zeta / abs(c[0]) ** (a - 1.0)
        third = np.abs(u3) < r * r
    else:
        third = np.abs(zeta) < r ** (a + 1.0)
    return (np.abs(u1) < r) & (np.abs(u2) < r) & third


def box_contains(q, box: BoxSpec, fp) -> bool:
    """Invert phi and test the anisotropic norm < r (strict)."""
    _check_variant1(box)
    return bool(_box_mask(box.center, tuple(SpacePoint.of(q)), box.r, box.variant, _alpha(fp)))


def box_volume(box: BoxSpec, fp) -> float:
    """Lebesgue volume: 8 r^4 |x|^(a-1) (variant 1) or 8 r^(a+3) (variant 2)."""
    _check_variant1(box)
    a = _alpha(fp)
    r = box.r
    if box.variant == 1:
        return 8.0 * r ** 4 * abs(box.center.x) ** (a - 1.0)
    return 8.0 * r ** (a + 3.0)


def ballbox_audit(fp, n: int = 10_000, seed: int = 0, spread: float = 1.5) -> dict:
    """Compare q in B1(p, r) u B2(p, r) with max{|dx|, |dy|, vertical} < r.

    p has log-uniform |coordinates| in [1e-3, 1e3] with random signs (and
    x = 0 on every 16th draw, where only B2 exists); r is log-uniform in
    [1e-3, 1e3]; q is uniform over ``spread`` times the envelope of the union
    in (dx, dy, zeta) coordinates, so both sides of the boundary are hit.
    """
    a = _alpha(fp)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    sign = lambda: rng.choice([-1.0, 1.0], n)
    logu = lambda: np.exp(rng.uniform(math.log(1e-3), math.log(1e3), n))
    P = np.stack([sign() * logu(), sign() * logu(), sign() * logu()], axis=-1)
    P[::16, 0] = 0.0
    r = logu()
    xa = np.abs(P[:, 0])
    zh = np.maximum(r ** (a + 1.0), r * r * xa ** (a - 1.0))
    u = rng.uniform(-spread, spread, size=(n, 3))
    dx, dy, zt = r * u[:, 0], r * u[:, 1], zh * u[:, 2]
    Q = np.stack([P[:, 0] + dx, P[:, 1] + dy, P[:, 2] + abs_pow(P[:, 0], a) * dy - zt], axis=-1)
    in_max = delta_max_form(P, Q, a) < r
    in_b2 = np.array([_box_mask(P[i], Q[i], r[i], 2, a) for i in range(n)])
    in_b1 = np.array([xa[i] > 0.0 and bool(_box_mask(P[i], Q[i], r[i], 1, a)) for i in range(n)])
    union = in_b1 | in_b2
    bad = np.flatnonzero(union != in_max)
    return {
        "alpha": a, "n": int(n), "seed": int(seed),
        "inside_fraction": float(in_max.mean()),
        "disagreements": int(len(bad)),
        "examples": [{"p": P[i].tolist(), "q": Q[i].tolist(), "r": float(r[i])} for i in bad[:5]],
        "ok": len(bad) == 0,
    }


def _zeta_halfwidth(x_abs: float, r: float, a: float) -> float:
    """Largest |zeta| compatible with vertical term < r."""
    return max(r ** (a + 1.0), r * r * x_abs ** (a - 1.0))


def ball_volume_exact(p, r: float, fp) -> float:
    """Lebesgue volume of the delta-ball by one-dimensional quadrature.

    In coordinates (dx, dy, zeta) the map to q has unit Jacobian and the ball
    is |dx| + |dy| + v(zeta) < r.  Slicing by l = |dx| + |dy| (planar density
    4 l) leaves the zeta-interval of half-width max((r-l)^(a+1), (r-l)^2 |x|^(a-1)).
    """
    a = _alpha(fp)
    p = SpacePoint.of(p)
    r = _positive_radius(r)
    xa = abs(p.x)
    f = lambda l: 8.0 * l * _zeta_halfwidth(xa, r - l, a)
    pts = None
    if 0.0 < xa < r:
        pts = [r - xa]
    val, _ = integrate.quad(f, 0.0, r, points=pts, epsabs=0.0, epsrel=1e-12, limit=200)
    return val


# ---------------------------------------------------------------- Monte Carlo


def _batches(n: int, seed: int):
    """(rng, size) per fixed-size batch; streams spawned from ``seed``."""
    n_batches = -(-n // BATCH)
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(n_batches)):
        yield np.random.default_rng(child), min(BATCH, n - k * BATCH)


def _ball_mask(p, Q, r: float, a: float, shape: str):
    if shape == "ball":
        return delta_arrays(tuple(p), Q, a)[4] < r
    return _box_mask(p, Q, r, 1 if shape == "box1" else 2, a)


def ball_volume_mc(p, r: float, fp, n: int = 100_000, seed: int = 0,
                   shape: str = "ball") -> MeasureEstimate:
    """Hit-or-miss Lebesgue volume of the delta-ball (or a box) around ``p``.

    Samples uniformly in (dx, dy, zeta) over the bounding envelope of B1 u B2,
    which contains the ball and both boxes; q = (x+dx, y+dy, z+|x|^a dy - zeta).
    """
    a = _alpha(fp)
    p = SpacePoint.of(p)
    r = _positive_radius(r)
    if n < 1:
        raise ValueError("n must be >= 1")
    if shape not in SHAPES:
        raise ValueError(f"shape must be one of {SHAPES}")
    if shape == "box1" and p.x == 0.0:
        raise ValueError("variant-1 box needs center.x != 0")
    zh = _zeta_halfwidth(abs(p.x), r, a)
    env = 8.0 * r * r * zh
    xa = abs(p.x) ** a
    hits = 0
    for rng, m in _batches(n, seed):
        u = rng.uniform(-1.0, 1.0, size=(m, 3))
        dx, dy, zt = r * u[:, 0], r * u[:, 1], zh * u[:, 2]
        Q = np.stack([p.x + dx, p.y + dy, p.z + xa * dy - zt], axis=-1)
        hits += int(np.count_nonzero(_ball_mask(p, Q, r, a, shape)))
    frac = hits / n
    hw = _Z95 * env * math.sqrt(frac * (1.0 - frac) / n)
    return MeasureEstimate(env * frac, hw, n, seed)


def _section_halfheight(x_abs: float, r: float, a: float) -> float:
    """Bound on |dy| within the planar section of B1 u B2 at a surface point."""
    if x_abs == 0.0:
        return r
    return min(r, max(r ** (a + 1.0) / x_abs ** a, r * r / x_abs))


def mu_ball_mc(u, r: float, fp, n: int = 100_000, seed: int = 0,
               shape: str = "ball") -> MeasureEstimate:
    """Perimeter measure int |x|^a over the planar section of the ball at ``u``.

    Stratified over a k x k grid of the section rectangle with the same number
    of points per cell; the CI uses the within-cell variances.
    """
    a = _alpha(fp)
    u = SurfacePoint.of(u)
    r = _positive_radius(r)
    if n < 1:
        raise ValueError("n must be >= 1")
    if shape not in SHAPES:
        raise ValueError(f"shape must be one of {SHAPES}")
    if shape == "box1" and u.x == 0.0:
        raise ValueError("variant-1 box needs center.x != 0")
    h = _section_halfheight(abs(u.x), r, a)
    k = max(1, int(math.isqrt(max(n // 4, 1))))
    per = max(2, n // (k * k))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    cells = k * k
    ia, ib = np.divmod(np.arange(cells), k)
    jit = rng.uniform(size=(per, cells, 2))
    sa = (ia + jit[..., 0]) / k
    sb = (ib + jit[..., 1]) / k
    da = r * (2.0 * sa - 1.0)
    db = h * (2.0 * sb - 1.0)
    p = (u.x, u.y, 0.0)
    Q = np.stack([u.x + da, u.y + db, np.zeros_like(da)], axis=-1)
    w = np.where(_ball_mask(p, Q, r, a, shape), abs_pow(u.x + da, a), 0.0)
    area = 4.0 * r * h
    cell_area = area / cells
    value = cell_area * float(np.sum(w.mean(axis=0)))
    var = cell_area ** 2 * float(np.sum(w.var(axis=0, ddof=1))) / per
    return MeasureEstimate(value, _Z95 * math.sqrt(var), per * cells, seed)


def mu_box_section(box: BoxSpec, fp) -> float:
    """Exact perimeter measure of the planar section of a box centered on z = 0.

    Section: |dx| < r, |dy| < m with m = min(r, r^2/|x|) (variant 1) or
    min(r, r^(a+1)/|x|^a) (variant 2); measure 2 m int_{x-r}^{x+r} |t|^a dt.
    """
    a = _alpha(fp)
    c = box.center
    if c.z != 0.0:
        raise ValueError("box center must lie on z = 0")
    _check_variant1(box)
    r, xa = box.r, abs(c.x)
    if box.variant == 1:
        m = min(r, r * r / xa)
    else:
        m = r if xa == 0.0 else min(r, r ** (a + 1.0) / xa ** a)
    integral = abs_pow_antiderivative(c.x + r, a) - abs_pow_antiderivative(c.x - r, a)
    return 2.0 * m * float(integral)


def _section_width(x_abs: float, s: float, a: float) -> float:
    """Largest dy >= 0 with dy + v(|x|^a dy) <= s at base point |x|."""
    if s <= 0.0:
        return 0.0
    if x_abs == 0.0:
        return s
    g = lambda b: b + float(vertical_term(x_abs ** a * b, x_abs, a))
    hi = expand_bracket(g, s, s)
    return solve_increasing(g, s, 0.0, hi)


def mu_ball_quad(u, r: float, fp) -> float:
    """Perimeter measure of the ball section by quadrature over dx (oracle)."""
    a = _alpha(fp)
    u = SurfacePoint.of(u)
    r = _positive_radius(r)
    xa = abs(u.x)
    f = lambda t: 2.0 * _section_width(xa, r - abs(t), a) * abs(u.x + t) ** a
    # kinks: dx = 0, the line x = 0, and the switch of vertical branch at dy = |x|
    pts = [0.0, -u.x, r - 2.0 * xa, 2.0 * xa - r]
    pts = sorted({t for t in pts if -r < t < r})
    val, _ = integrate.quad(f, -r, r, points=pts, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def ahlfors_surrogate(u, r: float, fp) -> float:
    """r^3 |x|^(a-1) for |x| >= r, else r^(a+2); continuous at |x| = r."""
    a = _alpha(fp)
    u = SurfacePoint.of(u)
    r = _positive_radius(r)
    xa = abs(u.x)
    if xa >= r:
        return r ** 3 * xa ** (a - 1.0)
    return r ** (a + 2.0)


# ---------------------------------------------------------------- audit

# Frozen bands.  Both ratios depend on |x|/r only; a scan of the quadrature
# oracles over |x|/r in [1e-4, 1e4] gives mu*r/vol in [0.48, 2.0] and
# mu/surrogate in [0.129, 1.34] for alpha <= 3, so these bands leave room
# for Monte Carlo error.
AHLFORS_C_VOLUME = 2.5
AHLFORS_C_SURROGATE = 10.0


@dataclass(frozen=True)
class AhlforsGrid:
    radii: tuple = tuple(np.logspace(-1, 1, 5))
    centers: tuple = (0.0, 0.1, 1.0, 10.0, -1.0)
    y: float = 0.0


def ahlfors_audit(fp, grid: AhlforsGrid = AhlforsGrid(), n: int = 100_000, seed: int = 0,
                  max_rel_ci: float = 0.05, c_volume: float = AHLFORS_C_VOLUME,
                  c_surrogate: float = AHLFORS_C_SURROGATE) -> dict:
    """mu(B)*r/vol(B) and mu(B)/surrogate over radii x centers.

    A row whose MC relative half-width exceeds ``max_rel_ci`` is marked
    inconclusive instead of failed.
    """
    a = _alpha(fp)
    rows = []
    k = 0
    for x in grid.centers:
        for r in grid.radii:
            s_mu, s_vol = np.random.SeedSequence([seed, k]).generate_state(2)
            k += 1
            mu = mu_ball_mc((x, grid.y), r, a, n, int(s_mu))
            vol = ball_volume_mc((x, grid.y, 0.0), r, a, n, int(s_vol))
            sur = ahlfors_surrogate((x, grid.y), r, a)
            ratio_v = mu.value * r / vol.value
            ratio_s = mu.value / sur
            rel = max(mu.rel_half_width, vol.rel_half_width)
            in_band = (1.0 / c_volume <= ratio_v <= c_volume) and (1.0 / c_surrogate <= ratio_s <= c_surrogate)
            status = "ok" if in_band else "violation"
            if rel > max_rel_ci:
                status = "inconclusive"
            rows.append({
                "alpha": a, "x": float(x), "r": float(r),
                "mu_mc": mu.value, "mu_ci": mu.half_width,
                "vol_mc": vol.value, "vol_ci": vol.half_width,
                "surrogate": sur, "ratio_volume": ratio_v, "ratio_surrogate": ratio_s,
                "regime": "far" if abs(x) >= r else "near", "status": status,
            })
    statuses = [row["status"] for row in rows]
    return {
        "alpha": a,
        "n": n,
        "seed": seed,
        "bands": {"volume": [1.0 / c_volume, c_volume], "surrogate": [1.0 / c_surrogate, c_surrogate]},
        "rows": rows,
        "violations": statuses.count("violation"),
        "inconclusive": statuses.count("inconclusive"),
        "ok": "violation" not in statuses,
    }


__all__ = [
    "BoxSpec", "MeasureEstimate", "phi", "box_contains", "box_volume", "ball_volume_exact",
    "ball_volume_mc", "mu_box_section", "mu_ball_mc", "mu_ball_quad", "ahlfors_surrogate",
    "AhlforsGrid", "ahlfors_audit", "ballbox_audit", "AHLFORS_C_VOLUME", "AHLFORS_C_SURROGATE",
]
