"""Bracketed root finding for monotone scalar equations."""

from __future__ import annotations

import math
from typing import Callable

_EPS = 2.220446049250313e-16


class BracketError(ValueError):
    pass


def expand_bracket(g: Callable[[float], float], target: float, hi: float,
                   max_doublings: int = 200) -> float:
    """Double ``hi`` until ``g(hi) >= target`` for increasing ``g``."""
    hi = max(float(hi), 1e-300)
    for _ in range(max_doublings):
        if g(hi) >= target:
            return hi
        hi *= 2.0
    raise BracketError(f"no sign change found up to {hi!r}")


def solve_increasing(g: Callable[[float], float], target: float, lo: float, hi: float,
                     tol: float = 0.0, max_iter: int = 400) -> float:
    """Root of ``g(t) = target`` for ``g`` increasing on ``[lo, hi]``.

    Bisection safeguarded secant (Illinois variant): a secant step is taken
    when it lands strictly inside the bracket, otherwise the bracket is halved.
    Stops when ``|g(t) - target| <= tol * (1 + |target|)`` or when the bracket
    has collapsed to a few ulps; with ``tol=0`` it runs to full precision.
    """
    flo = g(lo) - target
    fhi = g(hi) - target
    if flo > 0.0 or fhi < 0.0:
        raise BracketError(f"[{lo}, {hi}] does not bracket the root (f={flo}, {fhi})")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    thresh = tol * (1.0 + abs(target))
    best, fbest = (lo, flo) if -flo < fhi else (hi, fhi)
    side = 0
    for _ in range(max_iter):
        if hi - lo <= 4.0 * _EPS * max(abs(lo), abs(hi)) or hi - lo < 1e-300:
            break
        t = lo - flo * (hi - lo) / (fhi - flo)
        if not (lo < t < hi) or not math.isfinite(t):
            t = 0.5 * (lo + hi)
        ft = g(t) - target
        if abs(ft) < abs(fbest):
            best, fbest = t, ft
        if ft == 0.0 or abs(ft) <= thresh and tol > 0.0:
            return t
        if ft < 0.0:
            lo, flo = t, ft
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = t, ft
            if side == 1:
                flo *= 0.5
            side = 1
    return best
