import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from martinet.flows import (
    ControlSegment, HorizontalPath, flow, lift, mean_abs_pow, path_length, polyline_z_gain,
    square_loop_path, square_loop_side, square_loop_z,
)
from martinet.roots import BracketError, expand_bracket, solve_increasing


# ---------------------------------------------------------------- roots


def test_solve_increasing_matches_brentq():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, c = rng.uniform(1, 4), rng.uniform(0.1, 50)
        g = lambda t: t * ((1 + t) ** a - 1)
        hi = expand_bracket(g, c, 1.0)
        t = solve_increasing(g, c, 0.0, hi)
        ref = optimize.brentq(lambda s: g(s) - c, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        assert t == pytest.approx(ref, rel=1e-13)


def test_solve_increasing_rejects_bad_bracket():
    with pytest.raises(BracketError):
        solve_increasing(lambda t: t, 5.0, 0.0, 1.0)


def test_solve_increasing_endpoints():
    assert solve_increasing(lambda t: t, 0.0, 0.0, 1.0) == 0.0
    assert solve_increasing(lambda t: t, 1.0, 0.0, 1.0) == 1.0


# ---------------------------------------------------------------- flows


def test_control_segment_normalizes_negative_duration():
    s = ControlSegment(1, 1, -1)
    assert (s.e1, s.e2, s.duration) == (-1, -1, 1)
    assert s.sup_speed == 1 and s.euclid_speed == pytest.approx(math.sqrt(2))


def test_flow_worked_example():
    q = flow((2, 2, 4), ControlSegment(1, 1, -1), 1)
    assert tuple(q) == pytest.approx((1, 1, 2.5), abs=1e-15)


def _ode_flow(p, e1, e2, t, a):
    rhs = lambda s, w: [e1, e2, e2 * abs(w[0]) ** a]
    sol = integrate.solve_ivp(rhs, (0, t), list(p), rtol=1e-12, atol=1e-13, method="DOP853")
    return sol.y[:, -1]


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.01, 3), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_flow_matches_ode(x, z, e1, e2, t, a):
    q = flow((x, 0.5, z), ControlSegment(e1, e2, t), a)
    ref = _ode_flow((x, 0.5, z), e1, e2, t, a)
    assert np.allclose(tuple(q), ref, rtol=1e-9, atol=1e-9)


def test_mean_abs_pow_short_and_long_intervals():
    for a in (1.0, 1.5, 2.0, 3.0):
        for x0, x1 in [(-1.0, 2.0), (0.3, 0.3 + 1e-12), (-2.0, -2.0 + 1e-9), (5.0, 4.0)]:
            ref = integrate.quad(lambda t: abs(t) ** a, min(x0, x1), max(x0, x1), epsrel=1e-13)[0]
            ref /= abs(x1 - x0)
            assert mean_abs_pow(x0, x1, a) == pytest.approx(ref, rel=1e-9)
    assert mean_abs_pow(2.0, 2.0, 2.0) == pytest.approx(4.0, rel=1e-15)


def test_vertical_edge_gain():
    assert polyline_z_gain([3.0, 3.0], [0.0, 2.0], 2.0) == pytest.approx(18.0)


def test_square_loop_examples():
    assert square_loop_z(0, 1, 2) == 1.0
    assert square_loop_z(1, 1, 1) == 1.0
    assert square_loop_z(1, 1, 2) == 3.0
    with pytest.raises(ValueError):
        square_loop_z(-1, 1, 2)


def test_square_loop_lift_closes():
    path = lift([(1, 0), (2, 0), (2, 1), (1, 1), (1, 0)], 0.0, 2)
    end = path.end(2)
    assert (end.x, end.y) == pytest.approx((1, 0), abs=1e-15)
    assert end.z == pytest.approx(3.0, rel=1e-14)


def test_square_loop_side_inverts():
    for a in (1.0, 2.0, 3.0):
        for x in (0.0, 0.5, 10.0):
            for g in (1e-6, 1.0, 1e4):
                u = square_loop_side(x, g, a)
                assert square_loop_z(x, u, a) == pytest.approx(g, rel=1e-13)


def test_square_loop_path_hits_height():
    for p, dz in [((2.0, 1.0, 0.0), 3.0), ((-1.0, 0.0, 1.0), -2.0), ((0.0, 0.0, 0.0), 1.0)]:
        end = square_loop_path(p, dz, 2).end(2)
        assert tuple(end) == pytest.approx((p[0], p[1], p[2] + dz), rel=1e-12, abs=1e-12)


def test_path_length_examples():
    assert path_length(HorizontalPath((0, 0, 0))) == {"sup_norm_length": 0, "euclid_norm_length": 0}
    L = path_length(HorizontalPath((0, 0, 0), (ControlSegment(1, 0, 3),)))
    assert L["sup_norm_length"] == 3 and L["euclid_norm_length"] == 3
    L = path_length(HorizontalPath((0, 0, 0), (ControlSegment(1, 1, 1),)))
    assert L["sup_norm_length"] == 1 and L["euclid_norm_length"] == pytest.approx(math.sqrt(2))


def test_path_sample_rows_end_at_endpoint():
    path = HorizontalPath((0.5, 0, 0), (ControlSegment(1, 0, 1), ControlSegment(0, 1, 2)))
    rows = path.sample(2, per_segment=4)
    assert len(rows) == 9
    assert rows[-1][0] == 3.0 and rows[-1][1] == path.end(2)
