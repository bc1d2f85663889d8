import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from martinet.core import dilate
from martinet.geometry import (
    AhlforsGrid, BoxSpec, ahlfors_audit, ahlfors_surrogate, ball_volume_exact, ball_volume_mc,
    ballbox_audit, box_contains, box_volume, mu_ball_mc, mu_ball_quad, mu_box_section, phi,
)


def test_phi_zero_is_identity():
    assert tuple(phi(1, (2, 3, 4), (0, 0, 0), 2)) == (2, 3, 4)
    assert tuple(phi(2, (2, 3, 4), (0, 0, 0), 2)) == (2, 3, 4)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 2), st.floats(0.1, 5), st.floats(-0.9, 0.9), st.floats(-0.9, 0.9),
       st.floats(-0.9, 0.9), st.sampled_from([1.0, 2.0, 3.0]))
def test_phi_image_inside_box(variant, x, u1, u2, u3, a):
    r = 1.3
    scale = r * r if variant == 1 else r ** (a + 1)
    q = phi(variant, (x, 0.5, -1.0), (u1 * r, u2 * r, u3 * scale), a)
    assert box_contains(q, BoxSpec(variant, (x, 0.5, -1.0), r), a)


def test_box_membership_examples():
    assert box_contains((1, 1, 1), BoxSpec(2, (1, 1, 1), 0.5), 2)
    assert not box_contains((0, 0, 1), BoxSpec(2, (0, 0, 0), 1), 2)
    with pytest.raises(ValueError):
        box_contains((0, 0, 0), BoxSpec(1, (0, 0, 0), 1), 2)


def test_box_volume_examples():
    assert box_volume(BoxSpec(1, (3, 0, 0), 1), 2) == 24.0
    assert box_volume(BoxSpec(2, (0, 0, 0), 1), 2) == 8.0
    assert box_volume(BoxSpec(2, (0, 0, 0), 1e-9), 2) < 1e-40
    with pytest.raises(ValueError):
        BoxSpec(2, (0, 0, 0), 0.0)


def test_box_volume_mc_within_ci():
    for shape, variant, p in [("box1", 1, (3, 0, 0)), ("box2", 2, (0.5, 1, 2))]:
        est = ball_volume_mc(p, 0.7, 2, 200_000, seed=1, shape=shape)
        exact = box_volume(BoxSpec(variant, p, 0.7), 2)
        assert abs(est.value - exact) <= 1.5 * est.half_width


def _ball_volume_tplquad(p, r, a):
    # integrate the indicator in (dx, dy, zeta): the map to q has unit Jacobian
    x = p[0]
    zh = max(r ** (a + 1), r * r * abs(x) ** (a - 1))

    def height(dx, dy):
        # |zeta| extent where the vertical term is below r - |dx| - |dy|
        s = r - abs(dx) - abs(dy)
        if s <= 0:
            return 0.0
        h = s ** (a + 1)
        if x != 0:
            h = max(h, s * s * abs(x) ** (a - 1))
        return 2.0 * min(h, zh)

    val, _ = integrate.dblquad(lambda dy, dx: height(dx, dy), -r, r, -r, r, epsabs=0, epsrel=1e-9)
    return val


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("p,r,a", [((0, 0, 0), 1.0, 2.0), ((10, 0, 0), 1.0, 2.0), ((0.5, 1, 0), 1.0, 1.5),
                                   ((2, 0, 5), 0.3, 3.0)])
def test_ball_volume_exact_vs_independent_quadrature(p, r, a):
    assert ball_volume_exact(p, r, a) == pytest.approx(_ball_volume_tplquad(p, r, a), rel=1e-7)


def test_ball_volume_homogeneous_at_origin():
    vals = [ball_volume_mc((0, 0, 0), r, 2, 200_000, seed=1) for r in (0.5, 1.0, 2.0)]
    scaled = [v.value / r ** 5 for v, r in zip(vals, (0.5, 1.0, 2.0))]
    assert max(scaled) - min(scaled) <= vals[1].rel_half_width * scaled[1]
    assert abs(scaled[1] - 0.4) <= vals[1].half_width


def test_ball_volume_far_regime_band():
    # frozen first-run value: vol / (r^4 10^(a-1)) = 2/3 exactly at r = 1, x = 10
    est = ball_volume_mc((10, 0, 0), 1.0, 2, 200_000, seed=1)
    assert ball_volume_exact((10, 0, 0), 1.0, 2) / 10 == pytest.approx(2 / 3, rel=1e-10)
    assert abs(est.value / 10 - 2 / 3) <= est.half_width / 10


def test_ball_volume_mc_rejects_bad_input():
    with pytest.raises(ValueError):
        ball_volume_mc((0, 0, 0), 0.0, 2)
    with pytest.raises(ValueError):
        ball_volume_mc((0, 0, 0), 1.0, 2, shape="disc")


def test_mc_deterministic_in_seed():
    a = ball_volume_mc((1, 0, 0), 0.5, 2, 70_000, seed=4)
    b = ball_volume_mc((1, 0, 0), 0.5, 2, 70_000, seed=4)
    assert a == b


def test_mu_box_section_examples():
    assert mu_box_section(BoxSpec(1, (2, 0, 0), 1), 1) == pytest.approx(4.0)
    assert mu_box_section(BoxSpec(2, (0, 0, 0), 1), 1) == pytest.approx(2.0)
    assert mu_box_section(BoxSpec(2, (0, 0, 0), 1e-8), 1) < 1e-20


def test_mu_ball_mc_matches_box_sections():
    for shape, variant in (("box1", 1), ("box2", 2)):
        est = mu_ball_mc((1.5, 0), 0.8, 2, 100_000, seed=2, shape=shape)
        exact = mu_box_section(BoxSpec(variant, (1.5, 0, 0), 0.8), 2)
        assert abs(est.value - exact) <= 1.5 * est.half_width + 1e-12


def test_mu_ball_quad_vs_mc():
    for u, r, a in [((0, 0), 1.0, 2.0), ((1, 0), 1.0, 2.0), ((5, 1), 0.5, 1.5), ((0.2, 0), 3.0, 3.0)]:
        est = mu_ball_mc(u, r, a, 200_000, seed=0)
        assert abs(est.value - mu_ball_quad(u, r, a)) <= 1.5 * est.half_width


def test_mu_small_radius_vanishes():
    assert mu_ball_quad((1, 0), 1e-9, 2) < 1e-15


def test_surrogate_example():
    assert ahlfors_surrogate((0, 0), 2, 2) == 16.0


def test_mu_dilation():
    a, r = 2.0, 3.0
    u, rho = (0.7, 0.2), 0.4
    ur = tuple(dilate((u[0], u[1], 0), r, a))[:2]
    assert mu_ball_quad(ur, r * rho, a) == pytest.approx(r ** (a + 2) * mu_ball_quad(u, rho, a), rel=1e-8)


def test_ahlfors_single_point():
    res = ahlfors_audit(2, AhlforsGrid(radii=(1.0,), centers=(1.0,)), n=50_000)
    row = res["rows"][0]
    assert math.isfinite(row["ratio_volume"]) and row["ratio_volume"] > 0
    assert res["ok"]


@pytest.mark.parametrize("alpha", [1.0, 2.0])
def test_ballbox_union_identity(alpha):
    res = ballbox_audit(alpha, 2000, seed=1)
    assert res["ok"] and res["disagreements"] == 0
    assert 0.1 < res["inside_fraction"] < 0.9

