import numpy as np
import pytest

from martinet.core import delta
from martinet.oracle import (
    EQUIVALENCE_K, OracleConfig, cc_bracket, cc_lower, cc_upper, constructive_upper,
    equivalence_audit, equivalence_k, sample_pairs,
)

FAST = OracleConfig(segments=6, starts=6, tol=1e-3)


def test_config_validation():
    for bad in (dict(segments=0), dict(starts=0), dict(tol=0.0)):
        with pytest.raises(ValueError):
            OracleConfig(**bad)


def test_same_point_bracket_is_zero():
    br = cc_bracket((1, 2, 3), (1, 2, 3), 2)
    assert (br.lower, br.upper) == (0.0, 0.0)


def test_horizontal_move_is_exact():
    br = cc_bracket((0, 0, 0), (1, 0, 0), 2)
    assert br.lower == 1.0 and 1.0 <= br.upper <= 1.0 + 1e-9


def test_x2_move_at_origin_stays_in_plane():
    for t in (0.3, 1.0, 7.0):
        assert cc_upper((0, 0, 0), (0, t, 0), 2).value <= t + 1e-9


def test_vertical_move_at_origin():
    # majorant root T = (2/a)^(1/(a+1)) = 1 for a = 2; square loop of side 1 has length 4
    assert cc_lower((0, 0, 0), (0, 0, 1), 2) == pytest.approx(1.0, rel=1e-14)
    assert constructive_upper((0, 0, 0), (0, 0, 1), 2).value <= 4.0 + 1e-12
    br = cc_bracket((0, 0, 0), (0, 0, 1), 2)
    assert br.lower == pytest.approx(1.0) and br.upper <= 4.0


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
def test_witness_reaches_target(alpha):
    pairs = sample_pairs(4, seed=11)
    for P, Q in pairs:
        up = cc_upper(P, Q, alpha, FAST)
        end = up.witness.end(alpha)
        scale = 1.0 + np.max(np.abs(Q))
        assert np.max(np.abs(np.array(tuple(end)) - Q)) <= 1e-9 * scale
        assert cc_lower(P, Q, alpha) <= up.value * (1 + 1e-12)


def test_optimizer_never_worse_than_constructive():
    for P, Q in sample_pairs(5, seed=2):
        assert cc_upper(P, Q, 2, FAST).value <= constructive_upper(P, Q, 2).value * (1 + 1e-12)


def test_audit_rejects_empty():
    with pytest.raises(ValueError):
        equivalence_audit(2, 0)


def test_axis_pairs_ratio_one():
    pairs = [((t, 0.0, 0.0), (t + s, 0.0, 0.0)) for t, s in [(-3, 1.5), (0, 2), (5, -0.25)]]
    res = equivalence_audit(2, 3, pairs=pairs, cfg=FAST)
    for key in ("upper_over_delta", "lower_over_delta"):
        assert res[key]["min"] == pytest.approx(1.0) and res[key]["max"] == pytest.approx(1.0)
    assert res["ok"]


def test_frozen_band_is_at_most_ten():
    assert all(k <= 10.0 for k in EQUIVALENCE_K.values())
    assert equivalence_k(2.0) == EQUIVALENCE_K[2.0]


def test_small_audit_ok_and_reproducible():
    a = equivalence_audit(1.5, 6, seed=3, cfg=FAST)
    b = equivalence_audit(1.5, 6, seed=3, cfg=FAST)
    assert a["ok"] and a["bracket_inversions"] == 0
    assert a["upper_over_delta"] == b["upper_over_delta"]


def test_threads_do_not_change_results():
    a = equivalence_audit(2, 4, seed=5, cfg=FAST)
    b = equivalence_audit(2, 4, seed=5, cfg=OracleConfig(segments=6, starts=6, tol=1e-3, threads=2))
    assert a["upper_over_delta"] == b["upper_over_delta"]


def test_delta_sits_inside_band_on_samples():
    for P, Q in sample_pairs(3, seed=9):
        d = delta(P, Q, 2).total
        br = cc_bracket(P, Q, 2, FAST)
        assert br.upper / d <= equivalence_k(2) and d / br.lower <= equivalence_k(2)
