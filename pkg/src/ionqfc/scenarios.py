"""Named scenarios and the segment-streaming HBT simulation behind them."""

from __future__ import annotations

import hashlib
import platform
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, analysis, budget, config, emitter, io, qfc, tcspc
from .errors import ConfigError, ParameterError
from .seeding import derive_seed, segment_bounds, segment_rng, to_ps

SCENARIOS = (
    "fig2-efficiency",
    "fig3-tuning",
    "fig4-unconverted",
    "fig4-converted",
    "budget-range",
    "pump-optimize",
    "custom",
)
SIMULATION = {"fig4-unconverted": "fig4_unconverted", "fig4-converted": "fig4_converted", "custom": "custom"}


@dataclass
class Scenario:
    name: str
    overrides: dict = field(default_factory=dict)
    seed: int = 0
    duration: float | None = None
    output_dir: Path = Path("out")

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.name!r}; choose from {', '.join(SCENARIOS)}", key="scenario")


# -- model construction from a normalized config ---------------------------------


def emitter_params(cfg, mean_rate=0.0) -> emitter.EmitterParams:
    return emitter.EmitterParams(
        gamma=cfg["emitter.gamma"],
        rabi=cfg["emitter.rabi"],
        mean_rate=mean_rate,
        mm_freq=cfg["emitter.mm_freq"],
        mm_depth=cfg["emitter.mm_depth"],
    )


def conversion_model(cfg) -> qfc.ConversionModel:
    return qfc.ConversionModel(cfg["qfc.eta_max"], cfg["qfc.p_max"])


def noise_model(cfg) -> qfc.NoiseModel:
    return qfc.NoiseModel(cfg["qfc.dark_rate"], cfg["qfc.anti_stokes_coeff"])


def tuning_model(cfg) -> qfc.TuningModel:
    return qfc.TuningModel(cfg["qfc.ref_pump_wavelength"], cfg["qfc.ref_temperature"], cfg["qfc.temp_coeff"])


def link_budget(cfg, detector_qe_key="budget.apd_qe_493") -> budget.LinkBudget:
    b = budget.LinkBudget(
        source_rate=1.0,
        collection_efficiency=cfg["budget.collection_efficiency"],
        fiber_coupling=cfg["budget.fiber_coupling"],
        patch_loss=cfg["budget.patch_loss"],
        polarization_loss=cfg["budget.polarization_loss"],
        detector=tcspc.DetectorModel(quantum_efficiency=cfg[detector_qe_key]),
        fiber_attenuation={369.0: cfg["budget.alpha_369"], 493.0: cfg["budget.alpha_493"], 780.0: cfg["budget.alpha_780"]},
        extra={"pmt_qe": cfg["budget.pmt_qe"], "apd_qe_780": cfg["budget.apd_qe_780"]},
    )
    # anchor the ion's emission rate on the PMT path
    b.source_rate = cfg["budget.pmt_rate"] / budget.rate_through_chain(b, budget.PMT_PATH)
    return b


def histogram_config(cfg, delay, mode="start-stop") -> tcspc.HistogramConfig:
    return tcspc.HistogramConfig(cfg["tcspc.bin_width"], cfg["tcspc.window"], delay).centered(mode)


# -- streaming simulation ------------------------------------------------------------


class StreamingCorrelator:
    """Accumulates a coincidence histogram from consecutive time segments.

    Starts of segment ``k`` are correlated once segment ``k + 1`` is known, so
    every pair is counted exactly once as long as a segment is longer than the
    recorded delay span.
    """

    def __init__(self, hconf: tcspc.HistogramConfig, mode: str = "start-stop"):
        if mode not in ("start-stop", "full"):
            raise ParameterError(f"unknown correlator mode {mode!r}")
        self.hconf = hconf
        self.mode = mode
        self.bin_ps = hconf.bin_ps
        self.delay_ps = hconf.delay_ps
        if mode == "full":
            self.edges_ps = tcspc.full_edges_ps(hconf)
            self.counts = np.zeros(self.edges_ps.size - 1, dtype=np.int64)
        else:
            self.counts = np.zeros(hconf.n_bins, dtype=np.int64)
        self.n_start = 0
        self.n_stop = 0
        self._starts: deque = deque(maxlen=2)
        self._stops: deque = deque(maxlen=3)

    def add(self, starts: np.ndarray, stops: np.ndarray) -> None:
        self.n_start += starts.size
        self.n_stop += stops.size
        self._starts.append(starts)
        self._stops.append(stops)
        if len(self._starts) == 2:
            # stops now hold segments k-1, k, k+1 around the pending starts k
            keep = None if self.mode == "full" else 2
            self._correlate(self._starts[0], self._stop_window(keep))

    def _stop_window(self, keep: int | None) -> np.ndarray:
        parts = list(self._stops)
        if keep is not None:
            parts = parts[-keep:]
        merged = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
        if merged.size > 1 and np.any(np.diff(merged) < 0):
            merged = np.sort(merged, kind="stable")
        return merged

    def _correlate(self, starts, stops) -> None:
        if self.mode == "full":
            self.counts += tcspc.full_counts(starts, stops, self.delay_ps, self.edges_ps)
        else:
            self.counts += tcspc.start_stop_counts(starts, stops, self.delay_ps, self.bin_ps, self.counts.size)

    def finish(self, duration: float) -> tcspc.CoincidenceHistogram:
        if self._starts:
            self._correlate(self._starts[-1], self._stop_window(2 if self.mode == "full" else 1))
            self._starts.clear()
        bw = self.bin_ps * 1e-12
        if self.mode == "full":
            edges = self.edges_ps * 1e-12
        else:
            edges = np.arange(self.counts.size + 1) * bw
        return tcspc.CoincidenceHistogram(
            edges, self.counts.copy(), duration, self.n_start / duration, self.n_stop / duration,
            self.delay_ps * 1e-12, self.mode,
        )


@dataclass
class HBTSetup:
    """Two-sided collection experiment; rates are detected counts/s."""

    params: emitter.EmitterParams
    hconf: tcspc.HistogramConfig
    start_signal: float
    start_noise: float
    stop_signal: float
    stop_noise: float
    duration: float
    converter_input: float | None = None  # photon rate entering the converter
    pump_power: float = 0.0
    conv: qfc.ConversionModel = field(default_factory=qfc.ConversionModel)
    noise: qfc.NoiseModel = field(default_factory=qfc.NoiseModel)
    start_det: tcspc.DetectorModel = field(default_factory=tcspc.DetectorModel)
    stop_det: tcspc.DetectorModel = field(default_factory=tcspc.DetectorModel)
    mode: str = "start-stop"
    segment: float = 1.0

    def converter_survival(self) -> float:
        """Per-photon survival through conversion and downstream optics."""
        eta = qfc.efficiency(self.pump_power, self.conv)
        return self.stop_signal / self.converter_input / eta

    def stop_path_rate(self) -> float:
        return self.converter_input if self.converter_input else self.stop_signal

    def anti_stokes(self) -> float:
        return self.noise.anti_stokes_coeff * self.pump_power if self.converter_input else 0.0


def run_hbt(setup: HBTSetup, seed: int) -> tcspc.CoincidenceHistogram:
    """Simulate the experiment segment by segment and return the raw histogram.

    The emitter is sampled only at the rate of photons that end up detected
    (plus, with conversion, those entering the converter); routing, conversion
    and Bernoulli QE losses commute, so this is equivalent to simulating every
    scattered photon.
    """
    s = setup
    seg_ps = to_ps(s.segment)
    reach = s.hconf.n_bins * s.hconf.bin_ps + abs(s.hconf.delay_ps)
    if seg_ps < reach:
        raise ParameterError("segment must be longer than the recorded delay span")
    stop_path = s.stop_path_rate()
    total = s.start_signal + stop_path
    params = s.params.with_rate(total)
    p_start = s.start_signal / total if total > 0 else 0.0
    probs = (p_start, 1.0 - p_start)

    if s.converter_input:
        extra = s.converter_survival()
        if not 0.0 <= extra <= 1.0:
            raise ParameterError(f"converter chain needs survival factor {extra:.3g} outside [0, 1]")
        survival = qfc.efficiency(s.pump_power, s.conv) * extra
        excess = s.stop_noise - s.anti_stokes() - s.stop_det.dark_rate
        if excess < -1e-9:
            raise ParameterError("stop-channel noise target below the converter and detector floor")
        conv_noise = s.anti_stokes() + max(excess, 0.0)
        stop_det = s.stop_det
    else:
        survival = 1.0
        conv_noise = 0.0
        stop_det = tcspc.DetectorModel(
            s.stop_det.quantum_efficiency, s.stop_noise, s.stop_det.timing_jitter_sigma, s.stop_det.dead_time
        )
    start_det = tcspc.DetectorModel(
        s.start_det.quantum_efficiency, s.start_noise, s.start_det.timing_jitter_sigma, s.start_det.dead_time
    )

    seeds = {name: derive_seed(seed, name) for name in ("emitter", "route", "qfc", "pmt", "apd")}
    corr = StreamingCorrelator(s.hconf, s.mode)
    last_start = last_stop = None
    stream = emitter.iter_stream(params, s.duration, seeds["emitter"], s.segment)
    for (k, t0, t1), (_, _, tags) in zip(segment_bounds(to_ps(s.duration), seg_ps), stream):
        a, b = emitter.split_stream(tags, probs, segment_rng(seeds["route"], k))
        if s.converter_input:
            b = qfc.convert_segment(b, t0, t1, survival, conv_noise, segment_rng(seeds["qfc"], k))
        a = tcspc.detect_segment(a, t0, t1, start_det, segment_rng(seeds["pmt"], k), last_start)
        b = tcspc.detect_segment(b, t0, t1, stop_det, segment_rng(seeds["apd"], k), last_stop)
        if a.size:
            last_start = int(a[-1])
        if b.size:
            last_stop = int(b[-1])
        corr.add(a, b)
    return corr.finish(s.duration)


def hbt_setup(
    cfg, section: str, duration: float | None = None, converted: bool | None = None, mode: str = "start-stop"
) -> HBTSetup:
    """Build the two-channel experiment for a ``fig4_*`` or ``custom`` config section."""
    g = lambda key: cfg[f"{section}.{key}"]  # noqa: E731
    if converted is None:
        converted = section == "fig4_converted"
    snr = g("snr")
    sp, npmt = analysis.split_for_snr(g("pmt_rate"), snr)
    sa, napd = analysis.split_for_snr(g("apd_rate"), snr)
    T = g("duration") if duration is None else duration
    setup = HBTSetup(
        params=emitter_params(cfg),
        hconf=histogram_config(cfg, g("delay"), mode),
        mode=mode,
        start_signal=sp,
        start_noise=npmt,
        stop_signal=sa,
        stop_noise=napd,
        duration=T,
        start_det=tcspc.DetectorModel(1.0, 0.0, cfg["tcspc.pmt.jitter"], cfg["tcspc.pmt.dead_time"]),
        stop_det=tcspc.DetectorModel(1.0, 0.0, cfg["tcspc.apd.jitter"], cfg["tcspc.apd.dead_time"]),
        segment=cfg["run.segment"],
    )
    if converted:
        setup.converter_input = cfg[f"{section}.qfc_input_rate"] if f"{section}.qfc_input_rate" in cfg else cfg["budget.qfc_input_rate"]
        setup.pump_power = cfg["qfc.pump_power"]
        setup.conv = conversion_model(cfg)
        setup.noise = noise_model(cfg)
        setup.stop_det = tcspc.DetectorModel(1.0, cfg["qfc.dark_rate"], cfg["tcspc.apd.jitter"], cfg["tcspc.apd.dead_time"])
    return setup


def hbt_summary(setup: HBTSetup, hist: tcspc.CoincidenceHistogram, tau_min: float) -> tuple[dict, analysis.G2Curve]:
    curve = analysis.normalize_g2(hist)
    g0, g0_err = analysis.g2_at_zero(curve)
    a = emitter.bin_averaged_min(setup.params, hist.bin_width)
    snr = analysis.channel_snr(setup.start_signal, setup.start_noise, setup.stop_signal, setup.stop_noise)
    decomp = analysis.predict_decomposition(
        setup.start_signal, setup.start_noise, setup.stop_signal, setup.stop_noise,
        hist.bin_width, hist.counts.size,
    )
    try:
        peak_hz, contrast = analysis.micromotion_spectrum(curve, tau_min)
        spectrum = analysis.g2_spectrum(curve, tau_min)
        significance = spectrum.significance
        resolution = spectrum.resolution
    except analysis.AnalysisWindowError:
        peak_hz = contrast = significance = resolution = float("nan")
    summary = {
        "g2_zero": g0,
        "g2_zero_err": g0_err,
        "snr": snr,
        "expected_g2": analysis.expected_g2(snr, a),
        "a": a,
        "micromotion_peak_hz": peak_hz,
        "micromotion_contrast": contrast,
        "micromotion_significance": significance,
        "spectral_resolution_hz": resolution,
        "histogram_snr": analysis.estimate_snr(decomp),
        "start_rate": hist.start_rate,
        "stop_rate": hist.stop_rate,
        "total_time": hist.total_time,
        "applied_delay_ns": hist.delay * 1e9,
        "total_counts": int(hist.counts.sum()),
        "histogram_rate": float(hist.counts.sum()) / hist.total_time,
        "channel_rates": {
            "start_signal": setup.start_signal,
            "start_noise": setup.start_noise,
            "stop_signal": setup.stop_signal,
            "stop_noise": setup.stop_noise,
        },
    }
    return summary, curve


# -- scenario runners ------------------------------------------------------------------


def _fig2(cfg, out: Path, scenario: Scenario) -> dict:
    conv, noise = conversion_model(cfg), noise_model(cfg)
    powers = np.linspace(0.0, 0.240, 25)
    rows = qfc.sweep(powers, conv, noise)
    io.write_rows(out / "fig2_efficiency.csv", "pump_mw,eta,noise_cps", rows, "{:.1f},{:.6f},{:.3f}")
    best = max(rows, key=lambda r: r[1])
    op = cfg["qfc.pump_power"]
    return {
        "peak_pump_mw": best[0],
        "peak_eta": best[1],
        "operating_pump_mw": 1e3 * op,
        "operating_eta": qfc.efficiency(op, conv),
        "operating_noise_cps": qfc.noise_rate(op, noise),
    }


def _fig3(cfg, out: Path, scenario: Scenario) -> dict:
    f_in, f_t = cfg["qfc.input_freq"], cfg["qfc.target_freq"]
    pump_wl, temp = qfc.solve_double_resonance(f_in, f_t, tuning_model(cfg))
    pumps = pump_wl + np.linspace(-0.5, 0.5, 21)
    outs = qfc.output_wavelength(f_in, pumps)
    rows = [(p, o, qfc.frequency_thz(o)) for p, o in zip(pumps, outs)]
    io.write_rows(out / "fig3_tuning.csv", "pump_nm,output_nm,output_thz", rows, "{:.4f},{:.5f},{:.6f}")
    h = 1e-4
    slope = float((qfc.output_wavelength(f_in, pump_wl + h) - qfc.output_wavelength(f_in, pump_wl - h)) / (2 * h))
    return {
        "pump_wavelength_nm": pump_wl,
        "pump_freq_thz": qfc.frequency_thz(pump_wl),
        "oven_temperature_c": temp,
        "output_freq_thz": qfc.dfg_frequency(f_in, qfc.frequency_thz(pump_wl)),
        "tuning_slope": slope,
    }


def _simulate(cfg, out: Path, scenario: Scenario) -> dict:
    section = SIMULATION[scenario.name]
    duration = scenario.duration if scenario.duration is not None else cfg[f"{section}.duration"]
    setup = hbt_setup(cfg, section, duration)
    hist = run_hbt(setup, scenario.seed)
    summary, curve = hbt_summary(setup, hist, cfg["analysis.tau_min"])
    io.write_histogram_csv(out / "histogram.csv", hist)
    io.write_g2_csv(out / "g2.csv", curve)
    return summary


def _budget_range(cfg, out: Path, scenario: Scenario) -> dict:
    b = link_budget(cfg)
    direct = budget.rate_through_chain(b, budget.DIRECT_APD_PATH)
    cal_direct = budget.calibration_factor(b, budget.DIRECT_APD_PATH, cfg["budget.apd_rate"])
    eta = qfc.efficiency(cfg["qfc.pump_power"], conversion_model(cfg))
    b.extra["qfc"] = eta
    conv_path = ("collection", "fiber_coupling", "patch", "polarization", "qfc", "apd_qe_780")
    conv_pred = budget.rate_through_chain(b, conv_path) * cfg["budget.qfc_input_rate"] / direct
    cal_conv = cfg["budget.converted_rate"] / conv_pred
    rates = {
        369.0: cfg["budget.apd_rate"],
        493.0: cfg["budget.apd_rate"],
        780.0: cfg["budget.converted_rate"],
    }
    rows = budget.range_table(b, rates, cfg["budget.min_rate"])
    io.write_rows(out / "range.csv", "wavelength_nm,alpha_db_km,max_range_km", rows, "{:.1f},{:.2f},{:.6f}")
    return {
        "source_rate": b.source_rate,
        "direct_apd_predicted": direct,
        "direct_apd_calibration": cal_direct,
        "converted_predicted": conv_pred,
        "converted_calibration": cal_conv,
        "net_conversion": cfg["budget.converted_rate"] / cfg["budget.qfc_input_rate"],
        "range_km": {f"{r[0]:g}": r[2] for r in rows},
        "range_ratio_780_493": rows[2][2] / rows[1][2],
        # same launched rate on both paths: pure attenuation ratio
        "equal_rate_ratio_780_493": budget.max_range(b, 780.0, cfg["budget.min_rate"], rate_at_zero=rates[493.0])
        / rows[1][2],
    }


def _pump_optimize(cfg, out: Path, scenario: Scenario) -> dict:
    conv, noise = conversion_model(cfg), noise_model(cfg)
    rate = cfg["budget.qfc_input_rate"]
    qe = 1.0
    p_star, snr_star = budget.optimal_pump(conv, noise, rate, qe)
    grid = np.arange(1, int(round(2e3 * conv.p_max)) + 1) * 1e-3
    snr = budget.snr_curve(grid, conv, noise, rate, qe)
    rows = budget.snr_sweep(grid, conv, noise, rate, qe)
    io.write_rows(out / "snr.csv", "pump_mw,snr", rows, "{:.1f},{:.6f}")
    return {
        "p_star_mw": 1e3 * p_star,
        "snr_star": snr_star,
        "grid_argmax_mw": float(1e3 * grid[int(np.argmax(snr))]),
        "operating_pump_mw": 1e3 * cfg["qfc.pump_power"],
        "operating_snr": float(budget.snr_curve(cfg["qfc.pump_power"], conv, noise, rate, qe)),
    }


RUNNERS = {
    "fig2-efficiency": _fig2,
    "fig3-tuning": _fig3,
    "fig4-unconverted": _simulate,
    "fig4-converted": _simulate,
    "custom": _simulate,
    "budget-range": _budget_range,
    "pump-optimize": _pump_optimize,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_scenario(scenario: Scenario, cfg: dict | None = None) -> dict:
    """Run one scenario, writing its data files, ``summary.json`` and ``manifest.json``."""
    cfg = config.apply_overrides(cfg if cfg is not None else config.defaults(), scenario.overrides)
    if scenario.name in SIMULATION:
        if scenario.duration is not None and not scenario.duration > 0:
            raise ConfigError(f"duration must be > 0 for {scenario.name}, got {scenario.duration:g}", key="duration")
    out = Path(scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = RUNNERS[scenario.name](cfg, out, scenario)
    summary = {"scenario": scenario.name, **summary}
    io.write_json(out / "summary.json", summary)
    files = sorted(p.name for p in out.iterdir() if p.name != "manifest.json" and p.is_file())
    manifest = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "duration": scenario.duration,
        "config_hash": config.config_hash(cfg),
        "config": {k: config._jsonable(v) for k, v in sorted(cfg.items())},
        "versions": {
            "ionqfc": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "files": {name: _sha256(out / name) for name in files},
    }
    io.write_json(out / "manifest.json", manifest, digits=None)
    return summary


def scenario_from_manifest(manifest: dict, output_dir) -> tuple[Scenario, dict]:
    cfg = config.normalize(manifest["config"])
    sc = Scenario(manifest["scenario"], {}, int(manifest["seed"]), manifest.get("duration"), Path(output_dir))
    return sc, cfg


def sweep(cfg: dict, param: str, start: float, stop: float, steps: int) -> tuple[str, list]:
    """One-dimensional sweep of a config parameter over an analytic quantity."""
    if steps < 1:
        raise ConfigError("steps must be >= 1", key="steps")
    if param not in config.SCHEMA:
        raise ConfigError(f"unknown configuration key {param!r}", key=param)
    values = np.linspace(start, stop, steps) if steps > 1 else np.array([start])
    rows = []
    if param == "qfc.pump_power":
        conv, noise = conversion_model(cfg), noise_model(cfg)
        header = "pump_mw,eta,noise_cps,snr"
        for p in values:
            c = config.apply_overrides(cfg, {param: float(p)})
            rows.append((1e3 * p, qfc.efficiency(p, conv), qfc.noise_rate(p, noise),
                         float(budget.snr_curve(p, conv, noise, c["budget.qfc_input_rate"], 1.0))))
        return header, rows
    if param == "tcspc.bin_width":
        params = emitter_params(cfg)
        return "bin_width_ps,a", [(1e12 * w, emitter.bin_averaged_min(params, w)) for w in values]
    if param.endswith(".snr"):
        a = emitter.bin_averaged_min(emitter_params(cfg), cfg["tcspc.bin_width"])
        return "snr,expected_g2", [(s, analysis.expected_g2(s, a)) for s in values]
    if param == "qfc.ref_temperature" or param == "qfc.temp_coeff":
        header = f"{param},pump_nm,temperature_c"
        for v in values:
            c = config.apply_overrides(cfg, {param: float(v)})
            rows.append((v, *qfc.solve_double_resonance(c["qfc.input_freq"], c["qfc.target_freq"], tuning_model(c))))
        return header, rows
    # generic: re-evaluate every analytic scenario metric that depends on the key
    header = f"{param},eta_operating,noise_operating,a,p_star_mw"
    for v in values:
        c = config.apply_overrides(cfg, {param: float(v)})
        conv, noise = conversion_model(c), noise_model(c)
        p_star, _ = budget.optimal_pump(conv, noise, c["budget.qfc_input_rate"], 1.0)
        rows.append((v, qfc.efficiency(c["qfc.pump_power"], conv), qfc.noise_rate(c["qfc.pump_power"], noise),
                     emitter.bin_averaged_min(emitter_params(c), c["tcspc.bin_width"]), 1e3 * p_star))
    return header, rows
