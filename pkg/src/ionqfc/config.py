"""Flat dotted-key JSON configuration with range-checked defaults.

Keys starting with ``#`` are comments and are ignored. Unknown keys are
rejected. ``load_config`` returns the full normalized parameter set with
defaults filled in.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from . import emitter, qfc
from .errors import ConfigError

INF = math.inf


@dataclass(frozen=True)
class Param:
    default: float
    lo: float = -INF
    hi: float = INF
    lo_open: bool = False
    hi_open: bool = False
    note: str = ""

    def bounds(self) -> str:
        left = "(" if self.lo_open else "["
        right = ")" if self.hi_open else "]"
        return f"{left}{self.lo:g}, {self.hi:g}{right}"

    def contains(self, x: float) -> bool:
        above = x > self.lo if self.lo_open else x >= self.lo
        below = x < self.hi if self.hi_open else x <= self.hi
        return above and below


def _pos(default, note=""):
    return Param(default, 0.0, INF, True, False, note)


def _nonneg(default, note=""):
    return Param(default, 0.0, INF, False, False, note)


def _frac(default, note=""):
    return Param(default, 0.0, 1.0, True, False, note)


SCHEMA: dict[str, Param] = {
    "emitter.gamma": _pos(emitter.DEFAULT_GAMMA, "P1/2 natural linewidth, 2pi x 20.1 MHz (rad/s)"),
    "emitter.rabi": Param(emitter.DEFAULT_RABI, 0.0, INF, False, False,
                          "calibrated so the 512 ps central-bin floor is 0.035 (rad/s)"),
    "emitter.mm_freq": Param(emitter.DEFAULT_MM_FREQ, note="micromotion, 2pi x 38.4 MHz (rad/s)"),
    "emitter.mm_depth": Param(emitter.DEFAULT_MM_DEPTH, 0.0, 1.0, False, True,
                              "micromotion intensity modulation depth (not measured; visible contrast)"),
    "qfc.eta_max": _frac(0.19, "peak end-to-end DFG efficiency"),
    "qfc.p_max": _pos(0.210, "coupled pump power at peak efficiency (W)"),
    "qfc.dark_rate": _nonneg(100.0, "APD noise with the input fiber blocked (c/s)"),
    "qfc.anti_stokes_coeff": _nonneg(5000.0, "(300 - 100) c/s over 40 mW of pump (c/s/W)"),
    "qfc.pump_power": _nonneg(0.040, "operating pump power (W)"),
    "qfc.input_freq": _pos(qfc.BA_S12_P12_THZ, "Ba+ S1/2-P1/2 (THz)"),
    "qfc.target_freq": _pos(qfc.RB87_D2_THZ, "87Rb D2 (THz)"),
    "qfc.ref_pump_wavelength": _pos(qfc.ANCHOR_LOW[0], "pump wavelength of peak DFG at the reference temperature (nm)"),
    "qfc.ref_temperature": Param(qfc.ANCHOR_LOW[1], 20.0, 80.0, note="reference oven temperature (C)"),
    "qfc.temp_coeff": Param(qfc.TuningModel().temp_coeff,
                            note="phase-matched pump shift from the two tuning anchors (nm/C)"),
    "qfc.pump_suppression_db": _nonneg(70.0, "pump filtering (dB)"),
    "qfc.input_leak_suppression_db": _nonneg(59.0, "493 nm leak-through filtering (dB)"),
    "qfc.passband_center": _pos(780.0, "output filter centre (nm)"),
    "qfc.passband_fwhm": _pos(10.0, "output filter width (nm)"),
    "tcspc.bin_width": _pos(512e-12, "counter resolution (s)"),
    "tcspc.window": _pos(400e-9, "recorded delay span (s)"),
    "tcspc.pmt.jitter": _nonneg(0.0, "PMT timing jitter sigma (s)"),
    "tcspc.pmt.dead_time": _nonneg(0.0, "PMT dead time (s)"),
    "tcspc.apd.jitter": _nonneg(0.0, "APD timing jitter sigma (s)"),
    "tcspc.apd.dead_time": _nonneg(0.0, "APD dead time (s)"),
    "budget.collection_efficiency": _frac(0.08, "two-lens total collection, split evenly"),
    "budget.fiber_coupling": _frac(0.17, "single-mode fiber coupling"),
    "budget.patch_loss": _frac(0.5, "patch cable between tables"),
    "budget.polarization_loss": _frac(0.5, "polarization selectivity of the conversion"),
    "budget.pmt_qe": _frac(0.06, "PMT quantum efficiency at 493 nm"),
    "budget.apd_qe_493": _frac(0.45, "APD quantum efficiency at 493 nm"),
    "budget.apd_qe_780": _frac(0.60, "APD quantum efficiency at 780 nm"),
    "budget.pmt_rate": _pos(20_800.0, "maximized PMT count rate (c/s)"),
    "budget.apd_rate": _pos(26_600.0, "direct 493 nm APD count rate (c/s)"),
    "budget.converted_rate": _pos(600.0, "converted 780 nm count rate (c/s)"),
    "budget.qfc_input_rate": _pos(26_100.0, "direct APD rate on the conversion day (c/s)"),
    "budget.min_rate": _pos(10.0, "minimum useful delivered rate for the range table (c/s)"),
    "budget.alpha_369": _nonneg(70.0, "fiber loss at 369 nm (dB/km)"),
    "budget.alpha_493": _nonneg(50.0, "fiber loss at 493 nm (dB/km)"),
    "budget.alpha_780": _nonneg(3.5, "fiber loss near 780 nm (dB/km)"),
    "fig4_unconverted.pmt_rate": _pos(19_700.0, "PMT rate during the 493/493 run (c/s)"),
    "fig4_unconverted.apd_rate": _pos(26_600.0, "APD rate during the 493/493 run (c/s)"),
    "fig4_unconverted.snr": _nonneg(15.8, "signal-to-noise from the noise decomposition"),
    "fig4_unconverted.duration": _pos(1200.0, "integration time, 20 min (s)"),
    "fig4_unconverted.delay": _nonneg(91.65e-9, "electronic delay on the start line (s)"),
    "fig4_converted.pmt_rate": _pos(20_500.0, "PMT rate during the 493/780 run (c/s)"),
    "fig4_converted.apd_rate": _pos(930.0, "APD rate during the 493/780 run (c/s)"),
    "fig4_converted.snr": _nonneg(1.80, "signal-to-noise from the noise decomposition"),
    "fig4_converted.duration": _pos(22_068.0, "integration time, 6.13 h (s)"),
    "fig4_converted.delay": _nonneg(53.76e-9, "electronic delay on the start line (s)"),
    "fig4_converted.qfc_input_rate": _pos(26_100.0, "493 nm rate delivered towards the converter (c/s)"),
    "custom.pmt_rate": _pos(20_000.0, "start channel total rate (c/s)"),
    "custom.apd_rate": _pos(20_000.0, "stop channel total rate (c/s)"),
    "custom.snr": Param(INF, 0.0, INF, note="per-channel signal-to-noise; inf for noiseless"),
    "custom.duration": _pos(100.0, "integration time (s)"),
    "custom.delay": _nonneg(50e-9, "electronic delay on the start line (s)"),
    "analysis.tau_min": _nonneg(50e-9, "inner edge of the micromotion analysis tail (s)"),
    "run.segment": _pos(1.0, "time segment for seeded generation (s)"),
}


def defaults() -> dict[str, float]:
    return {k: p.default for k, p in SCHEMA.items()}


def normalize(raw: dict) -> dict[str, float]:
    """Range-check ``raw`` against the schema and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    out = defaults()
    for key, value in raw.items():
        if key.startswith("#"):
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}", key=key)
        p = SCHEMA[key]
        if isinstance(value, str) and value.lower() in ("inf", "infinity"):
            value = INF
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}", key=key)
        value = float(value)
        if math.isnan(value) or not p.contains(value):
            raise ConfigError(f"{key}={value:g} outside accepted range {p.bounds()}", key=key)
        out[key] = value
    _cross_checks(out)
    return out


def _cross_checks(cfg: dict) -> None:
    if cfg["tcspc.window"] < cfg["tcspc.bin_width"]:
        raise ConfigError("tcspc.window must be at least one bin wide", key="tcspc.window")
    if cfg["qfc.target_freq"] >= cfg["qfc.input_freq"]:
        raise ConfigError("qfc.target_freq must be below qfc.input_freq", key="qfc.target_freq")
    if cfg["qfc.temp_coeff"] == 0:
        raise ConfigError("qfc.temp_coeff must be non-zero", key="qfc.temp_coeff")


def load_config(path=None) -> dict[str, float]:
    """Parse and validate a config file; ``None`` yields the defaults."""
    if path is None:
        return normalize({})
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", key=str(path))
    text = path.read_text()
    if not text.strip():
        return normalize({})
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return normalize(raw)


def apply_overrides(cfg: dict, overrides: dict) -> dict:
    merged = {k: v for k, v in cfg.items()}
    merged.update(overrides)
    return normalize(merged)


def dumps(cfg: dict) -> str:
    """Canonical JSON text (sorted keys) used for hashing and echo."""
    return json.dumps({k: _jsonable(v) for k, v in sorted(cfg.items())}, indent=2, sort_keys=True) + "\n"


def _jsonable(v):
    return "inf" if isinstance(v, float) and math.isinf(v) else v


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()


def annotated_defaults() -> str:
    """Default config with a ``#key`` comment before every entry."""
    lines = ["{"]
    items = list(SCHEMA.items())
    for i, (k, p) in enumerate(items):
        comma = "," if i < len(items) - 1 else ""
        lines.append(f'  "#{k}": {json.dumps(p.note)},')
        lines.append(f'  "{k}": {json.dumps(_jsonable(p.default))}{comma}')
    lines.append("}")
    return "\n".join(lines) + "\n"
