"""Dynamic-programming oracles and closed-form example families."""

import numpy as np
import pytest
from scipy.optimize import brentq

from windwalk.chain import asymmetric_kernel, one_parameter_kernel, symmetric_kernel
from windwalk.groupoid import Arc, word_metric
from windwalk.oracle import (
    StateSpaceExceeded,
    closed_form,
    closed_form_one_parameter,
    dp_hitting_series,
    dp_return_series,
    dp_truncated_G,
)
from windwalk.solver import IndexMap, solve_r


def test_first_coefficient_is_one_step_probability():
    k = asymmetric_kernel()
    for method in ("convolution", "words"):
        s = dp_hitting_series(k, Arc(1, 2, 1), 3, method=method)
        assert s.coeffs[0] == 0.0
        assert s.coeffs[1] == pytest.approx(k.prob(1, 2, 1))


def test_convolution_and_word_dp_agree():
    # the two routes are fully independent: one sums path decompositions,
    # the other enumerates probability mass over reduced words
    for k in (symmetric_kernel(3), asymmetric_kernel()):
        for target in (Arc(1, 2, 1), Arc(2, 3, -1), Arc(3, 1, 1)):
            a = dp_hitting_series(k, target, 12).coeffs
            b = dp_hitting_series(k, target, 12, method="words").coeffs
            assert np.allclose(a, b, atol=1e-15)
        for i in (1, 2):
            a = dp_return_series(k, i, 12).coeffs
            b = dp_return_series(k, i, 12, method="words").coeffs
            assert np.allclose(a, b, atol=1e-15)


def test_partial_sums_increase_and_stay_below_one():
    k = asymmetric_kernel()
    s = dp_hitting_series(k, Arc(2, 1, 1), 60)
    partial = np.cumsum(s.coeffs)
    assert np.all(np.diff(partial) >= 0)
    assert partial[-1] < 1.0  # transience


def test_partial_sum_against_scalar_cubic():
    s = dp_hitting_series(symmetric_kernel(3), Arc(1, 2, 1), 60)
    root = brentq(lambda r: r - (0.9 / 4) * (1 + r + 2 * r * r), 0, 0.999)
    assert abs(s.eval(0.9) - root) < 1e-6


def test_partial_sum_within_tail_bound_of_solver():
    for k in (symmetric_kernel(3), asymmetric_kernel()):
        idx = IndexMap(3)
        for lam in (0.5, 0.9):
            r = solve_r(k, lam)
            for (i, j, sign) in idx.tuples:
                partial = dp_hitting_series(k, Arc(i, j, sign), 80).eval(lam)
                exact = r.value(i, j, sign)
                assert partial <= exact + 1e-12
                assert exact - partial <= lam**80 / (1 - lam) + 1e-8


def test_return_series_start():
    s = dp_return_series(symmetric_kernel(3), 1, 6)
    assert s.coeffs[0] == 1.0
    assert s.coeffs[1] == 0.0  # one step always leaves the unit
    assert s.coeffs[2] == pytest.approx(0.25)  # immediate backtrack
    assert np.all(s.coeffs >= 0)


def test_return_series_decays_exponentially():
    s = dp_return_series(symmetric_kernel(3), 1, 40)
    logs = np.log(s.coeffs[6:])
    slope = np.polyfit(np.arange(len(logs)), logs, 1)[0]
    assert slope < -1e-3


def test_truncated_g_geometric_at_z_one():
    k = asymmetric_kernel()
    for m in (0, 5, 12):
        g = dp_truncated_G(k, word_metric(3), 1, 0.5, 1.0, m)
        assert g == pytest.approx((1 - 0.5 ** (m + 1)) / 0.5, rel=1e-13)


def test_truncated_g_monotone_and_tail_bounded():
    k = symmetric_kernel(3)
    m = word_metric(3)
    lo = dp_truncated_G(k, m, 1, 0.5, 0.9, 10)
    hi = dp_truncated_G(k, m, 1, 0.5, 0.9, 14)
    assert hi >= lo
    assert hi - lo <= 0.5**11 / 0.5


def test_truncated_g_domain():
    k = symmetric_kernel(3)
    with pytest.raises(ValueError):
        dp_truncated_G(k, word_metric(3), 1, 1.0, 0.9, 5)
    with pytest.raises(ValueError):
        dp_truncated_G(k, word_metric(3), 1, 0.5, 0.0, 5)


def test_state_cap_guard():
    with pytest.raises(StateSpaceExceeded):
        dp_truncated_G(symmetric_kernel(3), word_metric(3), 1, 0.5, 0.9, 30, state_cap=1000)
    with pytest.raises(StateSpaceExceeded):
        dp_hitting_series(symmetric_kernel(3), Arc(1, 2, 1), 40, method="words", state_cap=50)


def test_closed_form_symmetric():
    c = closed_form("symmetric", N=3)
    assert c.gamma_word == pytest.approx(0.25)
    assert c.sigma2_word == pytest.approx(11 / 16)
    assert c.gamma_fenced == pytest.approx(1 / 3)
    c6 = closed_form("symmetric", N=6)
    assert c6.gamma_fenced == pytest.approx(7 * 4 / (6 * 5))
    with pytest.raises(ValueError):
        closed_form("symmetric", N=2)


def test_closed_form_one_parameter_landmarks():
    c = closed_form("one_parameter", q=0.25)
    assert c.gamma_word == pytest.approx(0.25, abs=1e-14)
    assert c.sigma2_word == pytest.approx(11 / 16, abs=1e-13)
    # the fenced-variance maximum sits near q = 0.00205319 at 2.01584
    cmax = closed_form_one_parameter(0.00205319)
    assert cmax.sigma2_fenced == pytest.approx(2.01584, abs=5e-6)
    with pytest.raises(ValueError):
        closed_form("one_parameter", q=0.5)


def test_closed_form_asymmetric_table():
    c = closed_form("asymmetric")
    assert c.gamma_word == 0.272913
    assert c.sigma2_fenced == 0.916276
    assert len(c.r_values) == 12


def test_unknown_family():
    with pytest.raises(ValueError):
        closed_form("mystery")
