"""Phenomenological difference-frequency conversion stage.

Covers the pump-power dependence of the end-to-end efficiency, pump-induced
noise in the output passband, frequency bookkeeping for the DFG process and
the two-constraint (input and output both on resonance) tuning solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import timetags
from .emitter import PhotonStream
from .errors import DomainError, OutOfRangeError, ParameterError
from .seeding import segment_bounds, segment_rng, to_ps

C_NM_THZ = 299_792.458  # speed of light in nm * THz

BA_S12_P12_THZ = 607.425690
RB87_D2_THZ = 384.227982

# phase-matching anchors: peak DFG near 1336 nm at 35.5 C, on-resonance at 1343.169 nm, 43 C
ANCHOR_LOW = (1336.0, 35.5)
ANCHOR_HIGH = (1343.169, 43.0)
DEVICE_TEMP_RANGE = (20.0, 80.0)


@dataclass(frozen=True)
class ConversionModel:
    eta_max: float = 0.19
    p_max: float = 0.210

    def __post_init__(self):
        if not (0.0 < self.eta_max <= 1.0):
            raise ParameterError(f"eta_max must lie in (0, 1], got {self.eta_max}")
        if not self.p_max > 0:
            raise ParameterError(f"p_max must be > 0, got {self.p_max}")


@dataclass(frozen=True)
class NoiseModel:
    """Passband noise: constant floor plus anti-Stokes Raman linear in pump power."""

    dark_rate: float = 100.0
    anti_stokes_coeff: float = 5000.0

    def __post_init__(self):
        if self.dark_rate < 0 or self.anti_stokes_coeff < 0:
            raise ParameterError("noise rates must be >= 0")


def _default_temp_coeff() -> float:
    (l0, t0), (l1, t1) = ANCHOR_LOW, ANCHOR_HIGH
    return (l1 - l0) / (t1 - t0)


@dataclass(frozen=True)
class TuningModel:
    """Linear phase-matching: pump wavelength vs oven temperature."""

    ref_pump_wavelength: float = ANCHOR_LOW[0]
    ref_temperature: float = ANCHOR_LOW[1]
    temp_coeff: float = _default_temp_coeff()

    def __post_init__(self):
        if not math.isfinite(self.temp_coeff) or self.temp_coeff == 0:
            raise ParameterError(f"temp_coeff must be finite and non-zero, got {self.temp_coeff}")
        lo, hi = DEVICE_TEMP_RANGE
        if not lo <= self.ref_temperature <= hi:
            raise ParameterError(f"ref_temperature must lie in [{lo}, {hi}] C")

    def temperature_for(self, pump_wavelength: float) -> float:
        return self.ref_temperature + (pump_wavelength - self.ref_pump_wavelength) / self.temp_coeff


@dataclass(frozen=True)
class FilterChain:
    """Pass/block output filtering. Suppressions in dB, passband in nm."""

    pump_suppression_db: float = 70.0
    input_leak_suppression_db: float = 59.0
    passband_center: float = 780.0
    passband_fwhm: float = 10.0

    def __post_init__(self):
        if self.pump_suppression_db < 0 or self.input_leak_suppression_db < 0:
            raise ParameterError("filter suppressions must be >= 0 dB")
        if not self.passband_fwhm > 0:
            raise ParameterError("passband_fwhm must be > 0")

    def in_band(self, wavelength: float) -> bool:
        return abs(wavelength - self.passband_center) <= 0.5 * self.passband_fwhm

    def transmission(self, wavelength: float, kind: str = "signal") -> float:
        """Rate multiplier for light of ``kind`` ('signal', 'pump' or 'input')."""
        if kind == "pump":
            return 10.0 ** (-self.pump_suppression_db / 10.0)
        if kind == "input":
            return 10.0 ** (-self.input_leak_suppression_db / 10.0)
        if kind != "signal":
            raise ParameterError(f"unknown light kind {kind!r}")
        return 1.0 if self.in_band(wavelength) else 0.0


def _check_power(p):
    if np.any(np.asarray(p) < 0):
        raise ParameterError(f"pump power must be >= 0, got {p}")


def efficiency(pump_power, model: ConversionModel):
    """End-to-end DFG efficiency, ``eta_max * sin^2(pi/2 * sqrt(P / p_max))``."""
    _check_power(pump_power)
    x = np.sqrt(np.asarray(pump_power, dtype=float) / model.p_max)
    eta = model.eta_max * np.sin(0.5 * math.pi * x) ** 2
    return float(eta) if eta.ndim == 0 else eta


def noise_rate(pump_power, model: NoiseModel):
    _check_power(pump_power)
    out = model.dark_rate + model.anti_stokes_coeff * np.asarray(pump_power, dtype=float)
    return float(out) if out.ndim == 0 else out


def dfg_frequency(input_freq: float, pump_freq: float) -> float:
    """Output frequency in THz from energy conservation."""
    if not pump_freq > 0:
        raise DomainError(f"pump frequency must be > 0, got {pump_freq}")
    if pump_freq >= input_freq:
        raise DomainError(f"no DFG output: pump {pump_freq} THz >= input {input_freq} THz")
    return input_freq - pump_freq


def wavelength_nm(freq_thz: float) -> float:
    return C_NM_THZ / freq_thz


def frequency_thz(wavelength: float) -> float:
    return C_NM_THZ / wavelength


def output_wavelength(input_freq: float, pump_wavelength):
    """DFG output wavelength (nm) for a pump wavelength (nm); vectorised over the pump."""
    pump = C_NM_THZ / np.asarray(pump_wavelength, dtype=float)
    if np.any(pump >= input_freq):
        raise DomainError("pump frequency must be below the input frequency")
    out = C_NM_THZ / (input_freq - pump)
    return float(out) if out.ndim == 0 else out


def solve_double_resonance(
    input_freq: float = BA_S12_P12_THZ,
    target_freq: float = RB87_D2_THZ,
    tuning: TuningModel | None = None,
) -> tuple[float, float]:
    """Pump wavelength (nm) and oven temperature (C) putting the output on ``target_freq``."""
    tuning = tuning or TuningModel()
    if not input_freq > target_freq:
        raise DomainError(f"input {input_freq} THz must exceed target {target_freq} THz")
    pump_wl = C_NM_THZ / (input_freq - target_freq)
    temp = tuning.temperature_for(pump_wl)
    lo, hi = DEVICE_TEMP_RANGE
    if not lo <= temp <= hi:
        raise OutOfRangeError(f"required oven temperature {temp:.2f} C outside [{lo}, {hi}] C")
    return pump_wl, temp


def convert_segment(
    tags: np.ndarray,
    t0: int,
    t1: int,
    survival: float,
    noise_cps: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Bernoulli-thin ``tags`` and add homogeneous noise over ``[t0, t1)`` ps."""
    kept = tags[rng.random(tags.size) < survival] if survival < 1.0 else tags
    n_noise = rng.poisson(noise_cps * (t1 - t0) * 1e-12) if noise_cps > 0 else 0
    if n_noise == 0:
        return kept
    noise = rng.integers(t0, t1, size=n_noise, dtype=np.int64)
    return timetags.merge(kept, noise)


def convert_stream(
    stream: PhotonStream,
    pump_power: float,
    conv: ConversionModel,
    noise: NoiseModel,
    duration: float | None = None,
    seed: int = 0,
    dark_excess: float = 0.0,
    extra_loss: float = 1.0,
) -> PhotonStream:
    """Frequency-convert a photon stream.

    Each photon survives with probability ``efficiency(pump_power) * extra_loss``.
    Anti-Stokes photons at ``anti_stokes_coeff * pump_power`` plus ``dark_excess``
    are injected uniformly; the detector's own dark floor is left to the
    detector model.
    """
    _check_power(pump_power)
    if not 0.0 <= extra_loss <= 1.0:
        raise ParameterError(f"extra_loss must lie in [0, 1], got {extra_loss}")
    if dark_excess < 0:
        raise ParameterError("dark_excess must be >= 0")
    duration = stream.duration if duration is None else duration
    if duration < 0:
        raise ParameterError("duration must be >= 0")
    survival = efficiency(pump_power, conv) * extra_loss
    noise_cps = noise.anti_stokes_coeff * pump_power + dark_excess
    tags = timetags.as_tags(stream.timestamps)
    parts = []
    seg_ps = to_ps(stream.segment)
    for k, t0, t1 in segment_bounds(to_ps(duration), seg_ps):
        lo, hi = np.searchsorted(tags, [t0, t1])
        parts.append(convert_segment(tags[lo:hi], t0, t1, survival, noise_cps, segment_rng(seed, k)))
    out = timetags.merge(*parts) if parts else np.empty(0, dtype=np.int64)
    return PhotonStream(out, float(duration), int(seed), stream.segment)


def sweep(pump_powers, conv: ConversionModel, noise: NoiseModel) -> list[tuple[float, float, float]]:
    """Rows ``(pump_mw, eta, noise_cps)`` for the efficiency/noise curve."""
    p = np.asarray(pump_powers, dtype=float)
    return [(1e3 * x, float(efficiency(x, conv)), float(noise_rate(x, noise))) for x in p]
