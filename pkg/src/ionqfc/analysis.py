"""From raw coincidence histograms to normalized g2 and its predictions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AnalysisWindowError, DomainError, NormalizationError, ParameterError
from .tcspc import CoincidenceHistogram


@dataclass
class G2Curve:
    tau: np.ndarray
    g2: np.ndarray
    g2_err: np.ndarray
    counts: np.ndarray | None = None

    @property
    def bin_width(self) -> float:
        return float(self.tau[1] - self.tau[0]) if self.tau.size > 1 else float("nan")


@dataclass(frozen=True)
class NoiseDecomposition:
    """Histogram count rates (c/s) attributed to each kind of noise pairing."""

    start_sig_stop_noise: float
    start_noise_stop_sig: float
    noise_noise: float
    total_rate: float

    def __post_init__(self):
        parts = (self.start_sig_stop_noise, self.start_noise_stop_sig, self.noise_noise, self.total_rate)
        if any(x < 0 for x in parts):
            raise ParameterError("histogram rates must be >= 0")
        if self.noise_sum > self.total_rate * (1 + 1e-12):
            raise ParameterError("noise rates exceed the total histogram rate")

    @property
    def noise_sum(self) -> float:
        return self.start_sig_stop_noise + self.start_noise_stop_sig + self.noise_noise


def normalize_g2(hist: CoincidenceHistogram) -> G2Curve:
    """g2(tau) = N(tau) / (N_start * N_stop * dt * T), shot-noise errors."""
    if not hist.total_time > 0:
        raise NormalizationError("integration time must be > 0")
    if not (hist.start_rate > 0 and hist.stop_rate > 0):
        raise NormalizationError("both channel rates must be > 0")
    norm = hist.start_rate * hist.stop_rate * hist.bin_width * hist.total_time
    n = hist.counts.astype(float)
    return G2Curve(hist.tau.copy(), n / norm, np.sqrt(n) / norm, hist.counts.copy())


def expected_g2(snr: float, a: float) -> float:
    """g2(0) expected from the finite-bin floor ``a`` diluted by noise at ``snr``."""
    if snr < 0 or math.isnan(snr):
        raise ParameterError(f"snr must be >= 0, got {snr}")
    if not 0.0 <= a <= 1.0:
        raise ParameterError(f"a must lie in [0, 1], got {a}")
    rho = 1.0 if math.isinf(snr) else snr / (1.0 + snr)
    r2 = rho * rho
    return r2 * a + (1.0 - r2)


def estimate_snr(decomp: NoiseDecomposition) -> float:
    """Signal-to-noise of a histogram: (total - noise) / noise. ``inf`` if noiseless."""
    noise = decomp.noise_sum
    if noise == 0:
        return math.inf
    return (decomp.total_rate - noise) / noise


def channel_snr(signal_start: float, noise_start: float, signal_stop: float, noise_stop: float) -> float:
    """SNR entering ``expected_g2`` for injected per-channel rates.

    Noise clicks correlate flatly, so the signal-signal fraction of pairs at
    any delay is ``f_start * f_stop`` with ``f = signal / total``. Writing that
    fraction as ``(SNR / (1 + SNR))**2`` gives the geometric-mean channel SNR.
    """
    fs = signal_start / (signal_start + noise_start)
    ft = signal_stop / (signal_stop + noise_stop)
    rho = math.sqrt(fs * ft)
    return math.inf if rho >= 1.0 else rho / (1.0 - rho)


def split_for_snr(total_rate: float, snr: float) -> tuple[float, float]:
    """(signal, noise) rates of a channel whose own signal fraction is SNR/(1+SNR)."""
    if snr < 0:
        raise ParameterError("snr must be >= 0")
    rho = 1.0 if math.isinf(snr) else snr / (1.0 + snr)
    return total_rate * rho, total_rate * (1.0 - rho)


def predict_decomposition(
    signal_start: float, noise_start: float, signal_stop: float, noise_stop: float, bin_width: float, n_bins: int
) -> NoiseDecomposition:
    """Accidental-coincidence estimate of histogram rates, ``R_a R_b dt n_bins``.

    Approximate for start-stop mode once ``R_stop * window`` is not small.
    """
    span = bin_width * n_bins
    return NoiseDecomposition(
        start_sig_stop_noise=signal_start * noise_stop * span,
        start_noise_stop_sig=noise_start * signal_stop * span,
        noise_noise=noise_start * noise_stop * span,
        total_rate=(signal_start + noise_start) * (signal_stop + noise_stop) * span,
    )


def g2_at_zero(curve: G2Curve) -> tuple[float, float]:
    """Value and shot-noise error of the bin that covers tau = 0."""
    if curve.tau.size == 0:
        raise DomainError("empty curve")
    i = int(np.argmin(np.abs(curve.tau)))
    half = 0.5 * abs(curve.bin_width) if curve.tau.size > 1 else math.inf
    if abs(curve.tau[i]) > half * (1 + 1e-9):
        raise DomainError("no bin covers tau = 0; check the delay compensation")
    return float(curve.g2[i]), float(curve.g2_err[i])


def reduced_chi2_flat(curve: G2Curve) -> tuple[float, float]:
    """Mean of g2 and reduced chi-square against that constant.

    Errors come from the constant model rather than from each bin's own count,
    which would weight downward fluctuations up and bias the mean low by about
    one over the counts per bin. Assumes a common normalization for all bins.
    """
    g, e = curve.g2, curve.g2_err
    if g.size < 2:
        raise DomainError("need at least two bins")
    mean = float(np.mean(g))
    # g = k n and err = k sqrt(n), so k = sum(err^2) / sum(g)
    k = float(np.sum(e**2) / np.sum(g)) if np.sum(g) > 0 else 0.0
    if not (mean > 0 and k > 0):
        raise DomainError("flat-line test needs nonzero counts")
    chi2 = float(np.sum((g - mean) ** 2) / (mean * k) / (g.size - 1))
    return mean, chi2


@dataclass
class Spectrum:
    freqs: np.ndarray
    contrast: np.ndarray
    sigma: float  # per-quadrature std of ``contrast`` from shot noise
    resolution: float  # 1 / (analysed delay span)

    @property
    def peak(self) -> int:
        return int(np.argmax(self.contrast))

    @property
    def peak_freq(self) -> float:
        return float(self.freqs[self.peak])

    @property
    def significance(self) -> float:
        return float(self.contrast[self.peak] / self.sigma) if self.sigma > 0 else math.inf


def g2_spectrum(curve: G2Curve, tau_min: float = 50e-9, oversample: int = 8) -> Spectrum:
    """DFT of the g2 tail ``|tau| > tau_min``, as modulation contrast per frequency.

    The selected samples are linearly detrended and transformed directly (the
    tail has a gap around zero delay, so no FFT). One frequency bin is the
    inverse of the full delay span; the grid is ``oversample`` times finer so
    the peak is not lost between bins. Frequencies inside the first bin are
    treated as DC and skipped.
    """
    if oversample < 1:
        raise ParameterError("oversample must be >= 1")
    sel = np.abs(curve.tau) > tau_min
    tau = curve.tau[sel]
    g = curve.g2[sel]
    err = curve.g2_err[sel]
    n = tau.size
    if n < 16:
        raise AnalysisWindowError(f"only {n} bins beyond |tau| > {tau_min:g} s")
    dt = abs(curve.bin_width)
    mean = float(np.mean(g))
    if not mean > 0:
        raise AnalysisWindowError("tail of the curve is empty")
    span = float(tau.max() - tau.min()) + dt
    resolution = 1.0 / span
    resid = g - np.polyval(np.polyfit(tau, g, 1), tau)
    k = np.arange(oversample, int(oversample * span / (2 * dt)) + 1)
    freqs = k * (resolution / oversample)
    x = np.exp(-2j * np.pi * np.outer(freqs, tau)) @ resid
    contrast = 2.0 * np.abs(x) / (n * mean)
    sigma = 2.0 * math.sqrt(float(np.sum(err**2)) / 2.0) / (n * mean)
    return Spectrum(freqs, contrast, sigma, resolution)


def micromotion_spectrum(curve: G2Curve, tau_min: float = 50e-9) -> tuple[float, float]:
    """Frequency (Hz) and relative amplitude of the strongest tail oscillation."""
    spectrum = g2_spectrum(curve, tau_min)
    f = spectrum.peak_freq
    # the tail is two-sided; each side must hold the periods on its own
    side = 0.5 * int((np.abs(curve.tau) > tau_min).sum()) * abs(curve.bin_width)
    if side * f < 5.0:
        raise AnalysisWindowError(
            f"tail spans {side * f:.1f} periods of the {f / 1e6:.2f} MHz peak; need >= 5"
        )
    return f, float(spectrum.contrast[spectrum.peak])
