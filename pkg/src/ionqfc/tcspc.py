"""Detector models and two-channel coincidence histogramming.

Delays are handled as integer picoseconds. ``start_channel_delay`` is the
electronic offset added to every physical delay, so a recorded delay is
``t_stop - t_start + delay``. With a positive delay, photon pairs whose stop
precedes the start (tau < 0) still land at positive recorded delays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import timetags
from .errors import ParameterError
from .seeding import segment_bounds, segment_rng, to_ps

DEFAULT_BIN_WIDTH = 512e-12
DEFAULT_WINDOW = 400e-9


@dataclass(frozen=True)
class DetectorModel:
    quantum_efficiency: float = 1.0
    dark_rate: float = 0.0
    timing_jitter_sigma: float = 0.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise ParameterError(f"quantum_efficiency must lie in [0, 1], got {self.quantum_efficiency}")
        for name in ("dark_rate", "timing_jitter_sigma", "dead_time"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")


PMT_493 = DetectorModel(quantum_efficiency=0.06)
APD_493 = DetectorModel(quantum_efficiency=0.45)
APD_780 = DetectorModel(quantum_efficiency=0.60, dark_rate=100.0)


@dataclass
class TimeTagRecord:
    """Detected events on one channel, integer ps, sorted."""

    timestamps: np.ndarray
    duration: float
    channel: str = "ch"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.timestamps.size)

    @property
    def rate(self) -> float:
        return self.timestamps.size / self.duration if self.duration > 0 else 0.0


@dataclass(frozen=True)
class HistogramConfig:
    bin_width: float = DEFAULT_BIN_WIDTH
    window: float = DEFAULT_WINDOW
    start_channel_delay: float = 0.0

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ParameterError(f"bin_width must be > 0, got {self.bin_width}")
        if self.window < self.bin_width:
            raise ParameterError("window must be at least one bin wide")

    @property
    def n_bins(self) -> int:
        return int(round(self.window / self.bin_width))

    @property
    def bin_ps(self) -> int:
        return to_ps(self.bin_width)

    @property
    def delay_ps(self) -> int:
        return to_ps(self.start_channel_delay)

    def first_edge_ps(self, mode: str = "start-stop") -> int:
        return 0 if mode == "start-stop" else -((self.n_bins * self.bin_ps) // 2)

    def centered(self, mode: str = "start-stop") -> "HistogramConfig":
        """Copy whose delay is snapped so tau = 0 falls on a bin centre of ``mode``'s edges."""
        b = self.bin_ps
        origin = self.first_edge_ps(mode) + b // 2
        snapped = round((self.delay_ps - origin) / b) * b + origin
        return HistogramConfig(self.bin_width, self.window, snapped * 1e-12)


@dataclass
class CoincidenceHistogram:
    """Raw counts per delay bin. ``bin_edges`` are recorded delays in seconds."""

    bin_edges: np.ndarray
    counts: np.ndarray
    total_time: float
    start_rate: float
    stop_rate: float
    delay: float = 0.0
    mode: str = "start-stop"

    def __post_init__(self):
        if self.counts.size != self.bin_edges.size - 1:
            raise ParameterError("counts must have one entry per bin")

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def tau(self) -> np.ndarray:
        """Bin centres as physical delays (recorded delay minus electronic offset)."""
        return self.centers - self.delay


def _tags(rec) -> np.ndarray:
    return timetags.as_tags(rec.timestamps if hasattr(rec, "timestamps") else rec)


def detect_segment(
    tags: np.ndarray,
    t0: int,
    t1: int,
    det: DetectorModel,
    rng: np.random.Generator,
    last_accepted: int | None = None,
) -> np.ndarray:
    if det.quantum_efficiency < 1.0:
        tags = tags[rng.random(tags.size) < det.quantum_efficiency]
    n_dark = rng.poisson(det.dark_rate * (t1 - t0) * 1e-12) if det.dark_rate > 0 else 0
    if n_dark:
        tags = np.concatenate([tags, rng.integers(t0, t1, size=n_dark, dtype=np.int64)])
    if det.timing_jitter_sigma > 0 and tags.size:
        tags = tags + np.rint(rng.normal(0.0, det.timing_jitter_sigma * 1e12, tags.size)).astype(np.int64)
    if n_dark or det.timing_jitter_sigma > 0:
        tags = np.sort(tags, kind="stable")
    tags = timetags.apply_dead_time(tags, to_ps(det.dead_time), last_accepted)
    return timetags.resolve_collisions(tags)


def detect(stream, det: DetectorModel, seed: int, channel: str = "ch") -> TimeTagRecord:
    """Turn photon arrivals into detector clicks.

    Photons survive with probability ``quantum_efficiency``; dark counts are
    added at ``dark_rate``; Gaussian jitter is applied to every click and
    non-paralyzable dead time removes clicks too close to an accepted one.
    """
    tags = _tags(stream)
    duration = stream.duration
    segment = getattr(stream, "segment", None) or 1.0
    out = []
    last = None
    for k, t0, t1 in segment_bounds(to_ps(duration), to_ps(segment)):
        lo, hi = np.searchsorted(tags, [t0, t1])
        seg = detect_segment(tags[lo:hi], t0, t1, det, segment_rng(seed, k), last)
        if seg.size:
            last = int(seg[-1])
        out.append(seg)
    res = np.concatenate(out) if out else np.empty(0, dtype=np.int64)
    if det.timing_jitter_sigma > 0 and res.size > 1 and np.any(np.diff(res) <= 0):
        res = timetags.resolve_collisions(np.sort(res, kind="stable"))
    return TimeTagRecord(res, float(duration), channel)


def start_stop_counts(starts: np.ndarray, stops: np.ndarray, delay_ps: int, bin_ps: int, n_bins: int) -> np.ndarray:
    """First-stop-after-start histogram. Both arrays must be sorted."""
    counts = np.zeros(n_bins, dtype=np.int64)
    if starts.size == 0 or stops.size == 0:
        return counts
    # stop at t_stop counts at recorded delay t_stop - t_start + delay
    shifted = stops + delay_ps
    idx = np.searchsorted(shifted, starts, side="left")
    ok = idx < shifted.size
    d = shifted[idx[ok]] - starts[ok]
    d = d[d < n_bins * bin_ps]
    counts += np.bincount(d // bin_ps, minlength=n_bins)[:n_bins]
    return counts


def start_stop_histogram(starts, stops, config: HistogramConfig = HistogramConfig()) -> CoincidenceHistogram:
    """Classic TCSPC histogram: each start paired with the first following stop."""
    a, b = _tags(starts), _tags(stops)
    timetags.require_sorted(a, "start")
    timetags.require_sorted(b, "stop")
    n = config.n_bins
    bw = config.bin_ps
    counts = start_stop_counts(a, b, config.delay_ps, bw, n)
    T = _duration(starts, stops)
    edges = np.arange(n + 1) * (bw * 1e-12)
    return CoincidenceHistogram(edges, counts, T, a.size / T, b.size / T, config.delay_ps * 1e-12, "start-stop")


def _duration(starts, stops) -> float:
    for rec in (starts, stops):
        if getattr(rec, "duration", None):
            return float(rec.duration)
    raise ParameterError("records carry no duration")


def full_edges_ps(config: HistogramConfig) -> np.ndarray:
    n = config.n_bins
    bw = config.bin_ps
    # centred on zero recorded delay
    return (np.arange(n + 1) * bw + config.first_edge_ps("full")).astype(np.int64)


def full_counts(starts: np.ndarray, stops: np.ndarray, delay_ps: int, edges_ps: np.ndarray, chunk: int = 200_000) -> np.ndarray:
    """All start-stop pairs with recorded delay inside ``edges_ps``."""
    n_bins = edges_ps.size - 1
    bw = int(edges_ps[1] - edges_ps[0])
    lo_edge, hi_edge = int(edges_ps[0]), int(edges_ps[-1])
    counts = np.zeros(n_bins, dtype=np.int64)
    if starts.size == 0 or stops.size == 0:
        return counts
    shifted = stops + delay_ps
    for c0 in range(0, starts.size, chunk):
        s = starts[c0:c0 + chunk]
        lo = np.searchsorted(shifted, s + lo_edge, side="left")
        hi = np.searchsorted(shifted, s + hi_edge, side="left")
        m = hi - lo
        total = int(m.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(s.size), m)
        offs = np.arange(total) - np.repeat(np.cumsum(m) - m, m)
        d = shifted[lo[owner] + offs] - s[owner]
        counts += np.bincount((d - lo_edge) // bw, minlength=n_bins)[:n_bins]
    return counts


def full_correlation(starts, stops, config: HistogramConfig = HistogramConfig()) -> CoincidenceHistogram:
    """Multi-stop reference correlator over ``[-window/2, +window/2]``.

    Every start-stop pair in range is counted, so there is no pile-up bias.
    Exchanging the channels mirrors the delay axis; a delay lying exactly on
    an interior bin edge is assigned to the higher bin, so pairs on edges are
    the only ones that do not mirror exactly.
    """
    a, b = _tags(starts), _tags(stops)
    timetags.require_sorted(a, "start")
    timetags.require_sorted(b, "stop")
    edges = full_edges_ps(config)
    counts = full_counts(a, b, config.delay_ps, edges)
    T = _duration(starts, stops)
    return CoincidenceHistogram(edges * 1e-12, counts, T, a.size / T, b.size / T, config.delay_ps * 1e-12, "full")

