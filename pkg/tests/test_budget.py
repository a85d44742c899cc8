import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionqfc import budget, qfc
from ionqfc.budget import LinkBudget
from ionqfc.errors import ConfigError, DomainError, ParameterError

B = LinkBudget()
CONV = qfc.ConversionModel()
NOISE = qfc.NoiseModel()


def test_direct_apd_chain_within_15_percent():
    r = budget.rate_through_chain(B, budget.DIRECT_APD_PATH)
    assert abs(r / 26_600 - 1) < 0.15
    cal = budget.calibration_factor(B, budget.DIRECT_APD_PATH, 26_600)
    assert math.isclose(cal * r, 26_600)


def test_pmt_chain_reproduces_anchor():
    assert math.isclose(budget.rate_through_chain(B, budget.PMT_PATH), 20_800)


def test_empty_chain_is_source_rate():
    assert budget.rate_through_chain(B, ()) == B.source_rate


def test_stage_order_irrelevant():
    stages = ("collection", "fiber_coupling", "patch", "polarization", "detector")
    ref = budget.rate_through_chain(B, stages)
    for perm in itertools.permutations(stages):
        assert math.isclose(budget.rate_through_chain(B, perm), ref, rel_tol=1e-12)


def test_chain_concatenation_multiplicative():
    a, b = ("collection", "patch"), ("fiber_coupling", "detector")
    whole = budget.rate_through_chain(B, a + b)
    split = budget.rate_through_chain(B, a) * budget.rate_through_chain(B, b) / B.source_rate
    assert math.isclose(whole, split, rel_tol=1e-12)


def test_unknown_stage():
    with pytest.raises(ConfigError):
        budget.rate_through_chain(B, ("collection", "warp_drive"))


def test_budget_invariants():
    with pytest.raises(ParameterError):
        LinkBudget(fiber_coupling=0.0)
    with pytest.raises(ParameterError):
        LinkBudget(patch_loss=1.5)
    with pytest.raises(ParameterError):
        LinkBudget(fiber_attenuation={493.0: -1.0})


def test_fiber_transmission_examples():
    assert math.isclose(budget.fiber_transmission(50.0, 1.0), 1e-5)
    assert budget.fiber_transmission(12.3, 0.0) == 1.0
    assert math.isclose(budget.fiber_transmission(3.5, 10.0), 10**-3.5)
    with pytest.raises(ParameterError):
        budget.fiber_transmission(-1.0, 1.0)


def _bisect_range(r0, alpha, min_rate):
    lo, hi = 0.0, 1.0
    while r0 * budget.fiber_transmission(alpha, hi) > min_rate:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if r0 * budget.fiber_transmission(alpha, mid) > min_rate else (lo, mid)
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("wl, r0", [(493.0, 26_600.0), (780.0, 600.0), (369.0, 26_600.0)])
def test_max_range_against_bisection(wl, r0):
    closed = budget.max_range(B, wl, 10.0, rate_at_zero=r0)
    assert math.isclose(closed, _bisect_range(r0, B.attenuation(wl), 10.0), rel_tol=1e-10)


def test_max_range_780_default_budget_frozen():
    # 600 c/s delivered, 10 c/s floor, 3.5 dB/km: 10/3.5 * log10(60)
    assert math.isclose(budget.max_range(B, 780.0, 10.0, rate_at_zero=600.0), 5.080432143948, rel_tol=1e-10)


def test_max_range_ratio_attenuation_limited():
    r493 = budget.max_range(B, 493.0, 10.0, rate_at_zero=1e4)
    r780 = budget.max_range(B, 780.0, 10.0, rate_at_zero=1e4)
    assert math.isclose(r780 / r493, 50 / 3.5, rel_tol=1e-12)
    assert abs(r780 / r493 - 14.3) < 0.05


def test_max_range_edges():
    assert budget.max_range(B, 493.0, 100.0, rate_at_zero=100.0) == 0.0
    with pytest.raises(DomainError):
        budget.max_range(B, 493.0, 200.0, rate_at_zero=100.0)
    with pytest.raises(ParameterError):
        budget.max_range(B, 493.0, 0.0)
    with pytest.raises(ConfigError):
        budget.max_range(B, 1550.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.0, 100.0), st.floats(1.01, 10.0), st.floats(0.5, 100.0))
def test_max_range_strictly_decreasing(min_rate, factor, alpha):
    b = LinkBudget(fiber_attenuation={1.0: alpha, 2.0: alpha * factor})
    r0 = 1e4
    assert budget.max_range(b, 1.0, min_rate * factor, rate_at_zero=r0) < budget.max_range(b, 1.0, min_rate, rate_at_zero=r0)
    assert budget.max_range(b, 2.0, min_rate, rate_at_zero=r0) < budget.max_range(b, 1.0, min_rate, rate_at_zero=r0)


# -- pump optimisation ------------------------------------------------------------------------


def test_golden_section_on_parabola():
    x = budget.golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, 1e-8)
    assert abs(x - 0.3) < 1e-8


def test_optimal_pump_matches_grid_argmax():
    p_star, snr_star = budget.optimal_pump(CONV, NOISE, 26_100.0)
    grid = np.arange(1, 421) * 1e-3
    snr = budget.snr_curve(grid, CONV, NOISE, 26_100.0, 1.0)
    assert abs(p_star - grid[np.argmax(snr)]) <= 1e-3
    assert snr_star >= snr.max() - 1e-9


def test_optimal_pump_frozen_value():
    # stationary point of sin^2(pi/2 sqrt(P/p_max)) / (d + k P), frozen from a 1 uW grid search
    grid = np.arange(1, 420_001) * 1e-6
    frozen = grid[np.argmax(budget.snr_curve(grid, CONV, NOISE, 1.0, 1.0))]
    p_star, _ = budget.optimal_pump(CONV, NOISE, 1.0)
    assert abs(frozen - 0.060426) < 2e-6
    assert abs(p_star - frozen) < 1e-4


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 1e6), st.floats(0.01, 1.0))
def test_optimum_independent_of_rate_and_qe(rate, qe):
    p1, _ = budget.optimal_pump(CONV, NOISE, rate, qe)
    p2, _ = budget.optimal_pump(CONV, NOISE, 26_100.0, 1.0)
    assert abs(p1 - p2) < 2e-4


def test_no_anti_stokes_means_peak_power():
    p_star, _ = budget.optimal_pump(CONV, qfc.NoiseModel(100.0, 0.0), 1e4, bracket=(0.0, CONV.p_max))
    assert abs(p_star - CONV.p_max) < 2e-4


@pytest.mark.parametrize("bracket", [(0.0, 0.42), (0.01, 0.3), (0.02, 0.21), (0.0, 0.15)])
def test_optimum_invariant_to_bracket(bracket):
    p_star, _ = budget.optimal_pump(CONV, NOISE, 1e4, bracket=bracket)
    assert abs(p_star - 0.060426) < 2e-4


def test_snr_unimodal_on_grid():
    p = np.linspace(1e-4, CONV.p_max, 5000)
    s = budget.snr_curve(p, CONV, NOISE, 1e4, 1.0)
    k = int(np.argmax(s))
    assert np.all(np.diff(s[: k + 1]) > 0) and np.all(np.diff(s[k:]) < 0)


def test_optimal_pump_errors():
    with pytest.raises(ParameterError):
        budget.optimal_pump(CONV, NOISE, 0.0)
    with pytest.raises(DomainError):
        budget.optimal_pump(CONV, NOISE, 1e4, detector_qe=0.0)
    with pytest.raises(DomainError):
        budget.optimal_pump(CONV, qfc.NoiseModel(0.0, 0.0), 1e4)


def test_tables():
    rows = budget.snr_sweep([0.01, 0.04], CONV, NOISE, 1e4)
    assert rows[1][0] == 40.0
    table = budget.range_table(B, {493.0: 1e4, 780.0: 600.0}, 10.0)
    assert [r[0] for r in table] == [493.0, 780.0]
