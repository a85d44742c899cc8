"""Photon link budget, fiber reach and SNR-optimal pump power."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import ConfigError, DomainError, ParameterError
from .qfc import ConversionModel, NoiseModel, efficiency, noise_rate
from .tcspc import APD_493, DetectorModel

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

FIBER_ATTENUATION_DB_KM = {369.0: 70.0, 493.0: 50.0, 780.0: 3.5}

# detected rates used to anchor the budget
PMT_RATE_493 = 20_800.0
APD_RATE_493 = 26_600.0
APD_RATE_493_QFC_DAY = 26_100.0


@dataclass
class LinkBudget:
    """Per-stage efficiencies from the ion to a detector.

    ``collection_efficiency`` is the two-lens total, split evenly between the
    lenses. ``extra`` holds any further named stages (e.g. conversion).
    """

    source_rate: float = PMT_RATE_493 / (0.04 * 0.06)
    collection_efficiency: float = 0.08
    fiber_coupling: float = 0.17
    patch_loss: float = 0.5
    polarization_loss: float = 0.5
    detector: DetectorModel = APD_493
    fiber_attenuation: Mapping[float, float] = field(default_factory=lambda: dict(FIBER_ATTENUATION_DB_KM))
    extra: dict = field(default_factory=lambda: {"pmt_qe": 0.06})

    def __post_init__(self):
        if self.source_rate < 0:
            raise ParameterError("source_rate must be >= 0")
        for name, value in self.stage_table().items():
            if not 0.0 < value <= 1.0:
                raise ParameterError(f"stage {name!r} efficiency must lie in (0, 1], got {value}")
        if any(v < 0 for v in self.fiber_attenuation.values()):
            raise ParameterError("fiber attenuation must be >= 0 dB/km")

    def stage_table(self) -> dict[str, float]:
        table = {
            "collection": 0.5 * self.collection_efficiency,
            "collection_total": self.collection_efficiency,
            "fiber_coupling": self.fiber_coupling,
            "patch": self.patch_loss,
            "polarization": self.polarization_loss,
            "detector": self.detector.quantum_efficiency,
        }
        table.update(self.extra)
        return table

    def attenuation(self, wavelength: float) -> float:
        for wl, alpha in self.fiber_attenuation.items():
            if math.isclose(float(wl), float(wavelength), abs_tol=1e-6):
                return float(alpha)
        raise ConfigError(f"no fiber attenuation tabulated at {wavelength} nm", key="budget.fiber_attenuation")


DIRECT_APD_PATH = ("collection", "fiber_coupling", "detector")
PMT_PATH = ("collection", "pmt_qe")


def rate_through_chain(budget: LinkBudget, stages: Iterable[str] = ()) -> float:
    """Source rate times every listed stage efficiency."""
    table = budget.stage_table()
    rate = budget.source_rate
    for name in stages:
        if name not in table:
            raise ConfigError(f"unknown budget stage {name!r}; known: {sorted(table)}", key=name)
        rate *= table[name]
    return rate


def calibration_factor(budget: LinkBudget, stages: Iterable[str], measured_rate: float) -> float:
    """Unmodelled-optics factor closing the gap between the chain and a measured rate."""
    predicted = rate_through_chain(budget, stages)
    if predicted <= 0:
        raise DomainError("chain predicts zero rate")
    return measured_rate / predicted


def fiber_transmission(attenuation_db_per_km: float, length_km: float) -> float:
    if attenuation_db_per_km < 0 or length_km < 0:
        raise ParameterError("attenuation and length must be >= 0")
    return 10.0 ** (-attenuation_db_per_km * length_km / 10.0)


def max_range(
    budget: LinkBudget,
    wavelength: float,
    min_rate: float,
    stages: Iterable[str] = DIRECT_APD_PATH,
    rate_at_zero: float | None = None,
) -> float:
    """Fiber length (km) at which the delivered rate falls to ``min_rate``."""
    if not min_rate > 0:
        raise ParameterError("min_rate must be > 0")
    r0 = rate_through_chain(budget, stages) if rate_at_zero is None else rate_at_zero
    if min_rate > r0:
        raise DomainError(f"min_rate {min_rate:g} c/s exceeds the {r0:g} c/s available at zero length")
    alpha = budget.attenuation(wavelength)
    if alpha == 0:
        return math.inf
    return 10.0 / alpha * math.log10(r0 / min_rate)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Location of the maximum of a unimodal ``f`` on ``[lo, hi]`` to within ``tol``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def snr_curve(pump_power, conv: ConversionModel, noise: NoiseModel, input_rate: float, detector_qe: float):
    """Detected signal over detected noise as a function of coupled pump power (W)."""
    signal = input_rate * np.asarray(efficiency(pump_power, conv)) * detector_qe
    return signal / np.asarray(noise_rate(pump_power, noise))


def optimal_pump(
    conv: ConversionModel,
    noise: NoiseModel,
    input_rate: float,
    detector_qe: float = 1.0,
    tol: float = 1e-4,
    bracket: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """Pump power (W) maximizing the detected SNR, and that SNR."""
    if not input_rate > 0:
        raise ParameterError("input_rate must be > 0")
    if input_rate * detector_qe * conv.eta_max == 0:
        raise DomainError("signal is identically zero")
    if noise.dark_rate == 0 and noise.anti_stokes_coeff == 0:
        raise DomainError("noise is identically zero; SNR is unbounded")
    lo, hi = bracket or (0.0, 2.0 * conv.p_max)
    lo = max(lo, 1e-12)

    def f(p):
        return float(snr_curve(p, conv, noise, input_rate, detector_qe))

    p_star = golden_section_max(f, lo, hi, tol)
    return p_star, f(p_star)


def snr_sweep(pump_powers, conv, noise, input_rate, detector_qe=1.0):
    """Rows ``(pump_mw, snr)``."""
    p = np.asarray(pump_powers, dtype=float)
    s = snr_curve(p, conv, noise, input_rate, detector_qe)
    return [(1e3 * x, float(y)) for x, y in zip(p, s)]


def range_table(budget: LinkBudget, rates_at_zero: Mapping[float, float], min_rate: float):
    """Rows ``(wavelength_nm, alpha_db_km, max_range_km)``."""
    rows = []
    for wl, r0 in rates_at_zero.items():
        rows.append((float(wl), budget.attenuation(wl), max_range(budget, wl, min_rate, rate_at_zero=r0)))
    return rows
