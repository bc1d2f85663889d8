import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from martinet.chains import (
    CHAIN_K, CaseLabel, ChainConfig, chain_audit, chain_audit_batch, char_chain, classify, connect,
    gradient_line_integral, lemma_derivative, min_z, monotonicity_audits, nonchar_chain, normalize,
    phi_fifa, phi_fifa_prime_plus_one, replay_error, sample_admissible, tau_from_z, tau_hat,
    tau_nonchar, z_hat, z_prime_nonchar,
)
from martinet.core import delta_plane, dilate
from martinet.fields import ScalarField, builtin_fields


def _pts(chain):
    return [tuple(p) for p in chain.points]


def test_classify_example():
    assert classify((10, 0), (10.01, 0), 1) is CaseLabel.NONCHARACTERISTIC
    assert classify((0, 0), (1, 1), 1) is CaseLabel.CHARACTERISTIC
    assert CaseLabel.MIXED.effective is CaseLabel.NONCHARACTERISTIC


def test_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(eps0=0.0)


def test_characteristic_worked_example():
    c = char_chain((1, 0), (2, 1), 1)
    want = [(1, 0, 0), (1, 1, 1), (0.5, 1, 1), (0.5, 5 / 3, 4 / 3), (2, 5 / 3, 4 / 3), (2, 1, 0)]
    assert np.allclose(_pts(c), want, rtol=0, atol=1e-12)
    assert c.scalars["tau"] == pytest.approx(2 / 3, abs=1e-15)
    assert c.length == pytest.approx(1 + 0.5 + 2 / 3 + 1.5 + 2 / 3, abs=1e-14)
    assert c.length / delta_plane((1, 0), (2, 1)) == pytest.approx(13 / 9, abs=1e-14)
    assert replay_error(c) <= 1e-15


def test_characteristic_same_height():
    c = char_chain((1, 3), (2, 3), 2)
    assert c.scalars["tau"] == 0.0
    assert np.allclose(_pts(c)[-1], (2, 3, 0), atol=0)


def test_characteristic_precondition():
    with pytest.raises(ValueError):
        char_chain((3, 0), (2, 1), 1)
    assert "x=0" in char_chain((0, 0), (1, 1), 2).flags


def test_characteristic_dilation_covariant():
    r, a = 2.0, 1.0
    c = char_chain((1, 0), (2, 1), a)
    cr = char_chain((2, 0), (4, 2), a)
    for p, q in zip(c.points, cr.points):
        assert np.allclose(tuple(dilate(p, r, a)), tuple(q), rtol=1e-10, atol=1e-10)


def test_noncharacteristic_worked_example():
    c = nonchar_chain((2, 0), (1, 1), 1)
    t = math.sqrt(2.5)
    assert c.scalars["sigma"] == 2.0 and c.scalars["z_prime"] == pytest.approx(2.5, abs=1e-15)
    assert c.scalars["tau"] == pytest.approx(t, abs=1e-12)
    pts = _pts(c)
    assert np.allclose(pts[1], (2, 2, 4), atol=1e-12)
    assert np.allclose(pts[2], (1, 1, 2.5), atol=1e-12)
    assert np.allclose(pts[3], (1, 1 + t, 2.5 + t), atol=1e-12)
    assert np.allclose(pts[6], (1, 1, 0), atol=1e-12)


def test_noncharacteristic_degenerate():
    c = nonchar_chain((3, 1), (3, 1), 2)
    assert c.scalars["tau"] == 0.0 and c.scalars["sigma"] == 0.0
    assert all(np.allclose(p, (3, 1, 0)) for p in _pts(c))


def test_z_prime_and_tau_alpha_two():
    zp = z_prime_nonchar(2, 1, 1, 2)
    assert zp == pytest.approx(4 + 5 / 3, rel=1e-15)
    ref = optimize.brentq(lambda t: t * ((1 + t) ** 2 - 1) - zp, 0, 10, xtol=1e-15)
    assert tau_nonchar(2, 1, 1, 2) == pytest.approx(ref, rel=1e-13)
    assert tau_from_z(1.0, 0.0, 2) == 0.0


def test_z_prime_matches_quadrature():
    for a in (1.0, 1.5, 3.0):
        x, x2, dy = 3.0, 2.2, 0.4
        ref = dy * x ** a + integrate.quad(lambda t: x ** a - t ** a, x2, x, epsrel=1e-13)[0]
        assert z_prime_nonchar(x, x2, dy, a) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.0, 1e4), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_tau_residual(x2, z, a):
    t = tau_from_z(x2, z, a)
    assert abs(t * ((x2 + t) ** a - x2 ** a) - z) <= 1e-12 * (1 + z) * max(1.0, x2 ** a)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(0.0, 1e4))
def test_tau_alpha_one_is_sqrt(x2, z):
    assert tau_from_z(x2, z, 1.0) == pytest.approx(math.sqrt(z), rel=1e-12, abs=0)


def test_z_prime_positive_on_admissible():
    for a in (1.0, 2.0):
        for (u, v) in sample_admissible("noncharacteristic", 300, 0, a):
            assert z_prime_nonchar(u[0], v[0], v[1] - u[1], a) > 0.0


@pytest.mark.parametrize("u,v", [((1, 0), (2, 1)), ((3, 5), (-1, 2)), ((-2, 0), (0.5, 0.1)),
                                 ((0, 0), (0, 1)), ((5, 0), (5.02, 0.001)), ((5, 0), (4.9, -0.001)),
                                 ((-7, 1), (-7.1, 1.0001))])
@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
def test_connect_closes(u, v, alpha):
    res = chain_audit(u, v, alpha)
    assert res["endpoint_err"] <= 1e-9
    assert res["max_z_violation"] <= 1e-12


def test_normalize_direct_pair_is_itself():
    plan = normalize((1, 0), (2, 1), "characteristic")
    assert tuple(plan.legs[0][0]) == (1, 0) and tuple(plan.legs[0][1]) == (2, 1)
    assert not plan.swapped and plan.sign == 1.0 and len(plan.legs) == 1


def test_connect_reversed_pair():
    conn = connect((2, 1), (1, 0), 1)
    start, end = conn.chains[0].points[0], conn.chains[-1].points[-1]
    assert (start.x, start.y) == (2, 1) and end.x == pytest.approx(1) and abs(end.z) < 1e-12


@pytest.mark.parametrize("kind", ["characteristic", "noncharacteristic"])
@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
def test_batch_audit(kind, alpha):
    res = chain_audit_batch(kind, 200, 1, alpha)
    assert res["ok"], res
    assert res["max_length_over_delta"] <= CHAIN_K[kind]


def test_min_z_sees_interior():
    c = char_chain((1, 0), (2, 1), 1)
    assert min_z(c) == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------- line integral


def _linear(cx, cy, cz, name="lin"):
    return ScalarField(name, lambda P: cx * P[..., 0] + cy * P[..., 1] + cz * P[..., 2],
                       lambda P: np.broadcast_to(np.array([cx, cy, cz], float), np.shape(P)))


def test_line_integral_constant_is_zero():
    f = _linear(0, 0, 0)
    assert gradient_line_integral(f, char_chain((1, 0), (2, 1), 2)) == 0.0


def test_line_integral_x_along_x1():
    from martinet.chains import ChainSpec
    from martinet.core import SpacePoint
    from martinet.flows import ControlSegment
    seg = ControlSegment(1.0, 0.0, 2.5)
    c = ChainSpec("custom", 2.0, (SpacePoint(0, 0, 0), SpacePoint(2.5, 0, 0)), (seg,))
    assert gradient_line_integral(_linear(1, 0, 0), c) == pytest.approx(2.5, rel=1e-12)


def test_pointwise_bound_on_samples():
    rng = np.random.default_rng(2)
    fields = [builtin_fields("gauss"), builtin_fields("poly_bump")]
    for k in range(30):
        f = fields[k % 2]
        a = [1.0, 2.0][k % 2]
        u, v = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        conn = connect(u, v, a)
        lhs = abs(float(f(np.array([u[0], u[1], 0.0]))) - float(f(np.array([v[0], v[1], 0.0]))))
        assert lhs <= gradient_line_integral(f, conn) + 1e-7


# ---------------------------------------------------------------- monotonicity


def test_tau_hat_zero_displacement():
    assert tau_hat(5.0, 0.0, 0.0, 2) == 0.0
    assert lemma_derivative(5.0, 0.0, 0.0, 2) == 0.0


def test_tau_hat_alpha_one_closed_form():
    x2, h1, h2 = 20.0, 0.6, 0.8
    assert tau_hat(x2, h1, h2, 1) == pytest.approx(math.sqrt(z_hat(x2, h1, h2, 1)), rel=1e-13)
    eta = 1e-4
    F = lambda s: s * math.sqrt(z_hat(s, h1, h2, 1))
    fd = (F(x2 + eta) - F(x2 - eta)) / (2 * eta)
    assert lemma_derivative(x2, h1, h2, 1) == pytest.approx(fd, rel=1e-6)


def test_phi_fifa_derivative_closed_form():
    t = np.linspace(0, 2, 11)
    eta = 1e-6
    fd = (phi_fifa(30.0, 0.6, 0.8, t + eta, 2) - phi_fifa(30.0, 0.6, 0.8, t - eta, 2)) / (2 * eta)
    assert np.allclose(fd + 1.0, phi_fifa_prime_plus_one(30.0, 0.6, 0.8, t, 2), atol=1e-7)


@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.0])
def test_monotonicity_audit(alpha):
    res = monotonicity_audits(alpha)
    assert res["ok"]
    assert res["fd_vs_closed_max"] <= 1e-6
    rows = sorted(res["rows"], key=lambda r: r["eps0"])
    assert rows[0]["sigma_fifa"] < rows[-1]["sigma_fifa"]
