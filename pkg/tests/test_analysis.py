import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import poisson_tags
from ionqfc import analysis, tcspc
from ionqfc.analysis import G2Curve, NoiseDecomposition
from ionqfc.errors import AnalysisWindowError, DomainError, NormalizationError, ParameterError
from ionqfc.tcspc import CoincidenceHistogram, HistogramConfig, TimeTagRecord


def _hist(counts, start=19_700.0, stop=26_600.0, T=1200.0, bw=512e-12, delay=0.0):
    counts = np.asarray(counts, dtype=np.int64)
    edges = np.arange(counts.size + 1) * bw
    return CoincidenceHistogram(edges, counts, T, start, stop, delay)


def test_normalization_worked_example():
    c = analysis.normalize_g2(_hist([322]))
    assert abs(c.g2[0] - 1.00) < 0.005
    assert math.isclose(c.g2_err[0], c.g2[0] / math.sqrt(322))


def test_zero_counts_give_zero():
    assert analysis.normalize_g2(_hist([0, 5])).g2[0] == 0.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(1.0, 1e5), st.floats(1.0, 1e5), st.floats(1.0, 1e5))
def test_scale_cancellation(n, T, ra, rb):
    # doubling counts and time together leaves g2 unchanged
    g1 = analysis.normalize_g2(_hist([n], ra, rb, T)).g2[0]
    g2 = analysis.normalize_g2(_hist([2 * n], ra, rb, 2 * T)).g2[0]
    assert math.isclose(g1, g2, rel_tol=1e-12, abs_tol=1e-300)


@pytest.mark.parametrize("kw", [dict(T=0.0), dict(start=0.0), dict(stop=0.0)])
def test_normalization_undefined(kw):
    with pytest.raises(NormalizationError):
        analysis.normalize_g2(_hist([1], **kw))


def test_expected_g2_values_and_limits():
    assert abs(analysis.expected_g2(15.8, 0.035) - 0.146) < 1e-3
    assert abs(analysis.expected_g2(1.80, 0.035) - 0.602) < 1e-3
    assert analysis.expected_g2(math.inf, 0.035) == 0.035
    assert analysis.expected_g2(0.0, 0.035) == 1.0
    with pytest.raises(ParameterError):
        analysis.expected_g2(-1.0, 0.1)
    with pytest.raises(ParameterError):
        analysis.expected_g2(1.0, 1.5)


def test_estimate_snr_worked_examples():
    assert abs(analysis.estimate_snr(NoiseDecomposition(276, 359, 6, 10_800)) - 15.8) < 0.1
    assert abs(analysis.estimate_snr(NoiseDecomposition(200, 20, 0, 615)) - 1.80) < 0.02
    assert analysis.estimate_snr(NoiseDecomposition(0, 0, 0, 100)) == math.inf


def test_decomposition_invariants():
    with pytest.raises(ParameterError):
        NoiseDecomposition(-1, 0, 0, 10)
    with pytest.raises(ParameterError):
        NoiseDecomposition(6, 5, 0, 10)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.0, 1e5), st.floats(0.01, 100.0))
def test_split_for_snr_roundtrip(total, snr):
    s, n = analysis.split_for_snr(total, snr)
    assert math.isclose(s + n, total, rel_tol=1e-12)
    assert math.isclose(analysis.channel_snr(s, n, s, n), snr, rel_tol=1e-9)


def test_channel_snr_geometric_mean():
    # signal fractions 0.9 and 0.4  ->  rho = 0.6  ->  SNR 1.5
    assert math.isclose(analysis.channel_snr(9, 1, 4, 6), 1.5, rel_tol=1e-12)
    assert analysis.channel_snr(5, 0, 5, 0) == math.inf


def test_g2_at_zero_requires_covering_bin():
    tau = np.array([-1.0, 0.0, 1.0]) * 512e-12
    c = G2Curve(tau, np.array([1.0, 0.2, 1.0]), np.array([0.1, 0.05, 0.1]))
    assert analysis.g2_at_zero(c) == (0.2, 0.05)
    shifted = G2Curve(tau + 2e-9, c.g2, c.g2_err)
    with pytest.raises(DomainError):
        analysis.g2_at_zero(shifted)


def test_poisson_full_correlation_flat():
    rng = np.random.default_rng(11)
    T = 200.0
    a, b = poisson_tags(3e4, T, rng), poisson_tags(3e4, T, rng)
    h = tcspc.full_correlation(TimeTagRecord(a, T), TimeTagRecord(b, T), HistogramConfig(window=1e-6))
    curve = analysis.normalize_g2(h)
    assert curve.g2.size >= 1000
    mean, chi2 = analysis.reduced_chi2_flat(curve)
    assert abs(mean - 1.0) < 0.01
    assert 0.8 <= chi2 <= 1.2


# -- micromotion spectrum -----------------------------------------------------------------


def _synthetic_curve(f_hz, contrast, noise, seed=0, n=781, bw=512e-12):
    rng = np.random.default_rng(seed)
    tau = (np.arange(n) - n // 2) * bw
    g = 1.0 + contrast * np.cos(2 * np.pi * f_hz * tau) + rng.normal(0, noise, n)
    return G2Curve(tau, g, np.full(n, noise))


def test_spectrum_finds_injected_tone():
    c = _synthetic_curve(38.4e6, 0.1, 0.02)
    f, amp = analysis.micromotion_spectrum(c)
    spectrum = analysis.g2_spectrum(c)
    assert abs(f - 38.4e6) <= spectrum.resolution
    assert 0.05 < amp < 0.12


def test_spectrum_flat_curve_has_no_significant_peak():
    spectrum = analysis.g2_spectrum(_synthetic_curve(38.4e6, 0.0, 0.02))
    assert spectrum.significance < 5.0


def test_spectrum_noise_floor_calibrated():
    # mean spectral amplitude of white noise is sigma * sqrt(pi / 2) (Rayleigh)
    vals = []
    for seed in range(20):
        spectrum = analysis.g2_spectrum(_synthetic_curve(38.4e6, 0.0, 0.02, seed=seed))
        vals.append(np.mean(spectrum.contrast) / spectrum.sigma)
    assert abs(np.mean(vals) - math.sqrt(math.pi / 2)) < 0.05


def test_spectrum_window_errors():
    short = _synthetic_curve(38.4e6, 0.1, 0.01, n=120)
    with pytest.raises(AnalysisWindowError):
        analysis.micromotion_spectrum(short)
    with pytest.raises(AnalysisWindowError):
        analysis.g2_spectrum(short, tau_min=1e-6)


def test_flat_mean_unbiased_at_low_counts():
    # self-weighted means drift low by ~1/n per bin; the model-error form must not
    rng = np.random.default_rng(4)
    n = rng.poisson(5.0, 20_000)
    c = analysis.normalize_g2(_hist(n, start=1.0, stop=1.0, T=5.0 / 512e-12))
    mean, chi2 = analysis.reduced_chi2_flat(c)
    assert abs(mean - 1.0) < 0.01
    assert abs(chi2 - 1.0) < 0.05
