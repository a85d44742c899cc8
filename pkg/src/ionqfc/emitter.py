"""Effective two-level emitter: photon correlations and timestamp streams.

The ion is treated as a resonantly driven two-level system whose emission
rate is sinusoidally modulated by micromotion. Streams are produced by
thinning a homogeneous Poisson candidate process against a renewal hazard
``R * g_tl(t - t_last) * (1 + m cos(W t))``, which reproduces the pair
correlation at delays much shorter than ``1/R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import ParameterError
from .seeding import segment_bounds, segment_rng, to_ps

TWO_PI = 2.0 * math.pi

DEFAULT_GAMMA = TWO_PI * 20.1e6
DEFAULT_MM_FREQ = TWO_PI * 38.4e6
DEFAULT_MM_DEPTH = 0.5
DEFAULT_BIN_WIDTH = 512e-12
# Rabi frequency that puts the 512 ps central-bin floor at 0.035 for the
# other defaults; regenerate with ``calibrate_rabi()``.
DEFAULT_RABI = 1703772552.332008
TARGET_BIN_MIN = 0.035

DEFAULT_SEGMENT = 1.0
_NO_EVENT = np.iinfo(np.int64).min


@dataclass(frozen=True)
class EmitterParams:
    """Effective emitter. Angular frequencies in rad/s, rates in counts/s."""

    gamma: float = DEFAULT_GAMMA
    rabi: float = DEFAULT_RABI
    mean_rate: float = 20_000.0
    mm_freq: float = DEFAULT_MM_FREQ
    mm_depth: float = DEFAULT_MM_DEPTH

    def __post_init__(self):
        validate_params(self)

    def with_rate(self, mean_rate: float) -> "EmitterParams":
        return replace(self, mean_rate=mean_rate)


def validate_params(p: EmitterParams) -> None:
    if not (np.isfinite(p.gamma) and p.gamma > 0):
        raise ParameterError(f"gamma must be > 0, got {p.gamma}")
    if not (np.isfinite(p.rabi) and p.rabi >= 0):
        raise ParameterError(f"rabi must be >= 0, got {p.rabi}")
    if not (np.isfinite(p.mean_rate) and p.mean_rate >= 0):
        raise ParameterError(f"mean_rate must be >= 0, got {p.mean_rate}")
    if not np.isfinite(p.mm_freq):
        raise ParameterError(f"mm_freq must be finite, got {p.mm_freq}")
    if not (0.0 <= p.mm_depth < 1.0):
        raise ParameterError(f"mm_depth must lie in [0, 1), got {p.mm_depth}")


@dataclass
class PhotonStream:
    """Emission times in integer picoseconds over ``[0, duration]`` seconds."""

    timestamps: np.ndarray
    duration: float
    seed: int
    segment: float = DEFAULT_SEGMENT
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.timestamps.size)

    @property
    def rate(self) -> float:
        return self.timestamps.size / self.duration if self.duration > 0 else 0.0


def _damping(params: EmitterParams):
    a = 0.75 * params.gamma
    mu2 = params.rabi**2 - params.gamma**2 / 16.0
    return a, mu2


def g2_two_level(tau, params: EmitterParams):
    """Intensity correlation of the driven two-level atom, without micromotion."""
    a, mu2 = _damping(params)
    t = np.abs(np.asarray(tau, dtype=float))
    if mu2 > 0:
        mu = math.sqrt(mu2)
        osc = np.cos(mu * t) + (a / mu) * np.sin(mu * t)
        g = 1.0 - np.exp(-a * t) * osc
    elif mu2 < 0:
        nu = math.sqrt(-mu2)
        # e^{-at} cosh(nu t) written with decaying exponentials only (nu < a)
        ep = np.exp(-(a - nu) * t)
        em = np.exp(-(a + nu) * t)
        g = 1.0 - (0.5 * (ep + em) + (a / nu) * 0.5 * (ep - em))
    else:
        g = 1.0 - np.exp(-a * t) * (1.0 + a * t)
    # the closed form cancels catastrophically near zero; use its Taylor series
    w2 = mu2 + a * a
    small = t * math.sqrt(max(abs(mu2), a * a)) < 1e-4
    if np.any(small):
        series = 0.5 * w2 * t * t - (a * w2 / 3.0) * t**3
        g = np.where(small, series, g)
    return g


def micromotion_factor(tau, params: EmitterParams):
    m = params.mm_depth
    return 1.0 + 0.5 * m * m * np.cos(params.mm_freq * np.asarray(tau, dtype=float))


def g2_ideal(tau, params: EmitterParams):
    """Ideal g2(tau) of the modulated single emitter. Accepts scalars or arrays."""
    validate_params(params)
    out = g2_two_level(tau, params) * micromotion_factor(tau, params)
    return float(out) if np.ndim(out) == 0 else out


def bin_average(params: EmitterParams, lo: float, hi: float, epsrel: float = 1e-6) -> float:
    """Mean of ``g2_ideal`` over ``[lo, hi]`` by adaptive quadrature."""
    if hi <= lo:
        raise ParameterError("bin must have positive width")
    f = lambda t: float(g2_two_level(t, params) * micromotion_factor(t, params))  # noqa: E731
    points = [0.0] if lo < 0.0 < hi else None
    val, _ = integrate.quad(f, lo, hi, epsrel=epsrel, epsabs=0.0, limit=500, points=points)
    return val / (hi - lo)


def bin_averaged_min(params: EmitterParams, bin_width: float = DEFAULT_BIN_WIDTH) -> float:
    """Floor ``a`` of the measurable g2(0): average of g2 over the central bin."""
    validate_params(params)
    if not bin_width > 0:
        raise ParameterError(f"bin_width must be > 0, got {bin_width}")
    half = 0.5 * bin_width
    # symmetric integrand: integrate one side only
    f = lambda t: float(g2_two_level(t, params) * micromotion_factor(t, params))  # noqa: E731
    val, _ = integrate.quad(f, 0.0, half, epsrel=1e-6, epsabs=0.0, limit=500)
    return val / half


def calibrate_rabi(
    target: float = TARGET_BIN_MIN,
    bin_width: float = DEFAULT_BIN_WIDTH,
    base: EmitterParams | None = None,
) -> float:
    """Rabi frequency giving ``bin_averaged_min(bin_width) == target``."""
    base = base or EmitterParams()

    def resid(log_rabi):
        return bin_averaged_min(replace(base, rabi=math.exp(log_rabi)), bin_width) - target

    lo, hi = math.log(base.gamma * 1e-3), math.log(base.gamma * 1e3)
    if resid(lo) * resid(hi) > 0:
        raise ParameterError(f"target floor {target} not reachable for bin width {bin_width}")
    return math.exp(optimize.brentq(resid, lo, hi, xtol=1e-14, rtol=1e-13))


def dip_area(params: EmitterParams) -> float:
    """Integral of ``1 - g_tl`` over positive delays, in seconds."""
    g = params.gamma
    return 1.5 * g / (params.rabi**2 + 0.5 * g * g)


def _g_bound(params: EmitterParams) -> float:
    a, mu2 = _damping(params)
    if mu2 <= 0:
        return 1.0
    return 1.0 + math.sqrt(1.0 + a * a / mu2)


def _memory_ps(params: EmitterParams) -> int:
    """Delay beyond which g_tl equals 1 to double precision."""
    a, mu2 = _damping(params)
    slow = a - math.sqrt(-mu2) if mu2 < 0 else a
    prefactor = 1.0 + a / math.sqrt(abs(mu2)) if mu2 != 0 else 1.0
    return to_ps((40.0 + math.log(prefactor)) / slow)


def hazard_scale(params: EmitterParams) -> float:
    """Base hazard that yields ``mean_rate`` once the antibunching dip is paid for."""
    r = params.mean_rate
    if r == 0:
        return 0.0
    denom = 1.0 / r - dip_area(params)
    if denom <= 0:
        raise ParameterError(
            f"mean_rate {r:g} c/s exceeds the emitter's saturated rate (~{1 / dip_area(params):g} c/s)"
        )
    return 1.0 / denom


class _Thinner:
    """Renewal thinning of Poisson candidates, one segment at a time."""

    def __init__(self, params: EmitterParams):
        self.params = params
        self.base = hazard_scale(params)
        self.envelope = self.base * _g_bound(params) * (1.0 + params.mm_depth)
        self.memory = _memory_ps(params)
        self.norm = _g_bound(params) * (1.0 + params.mm_depth)
        self.last = None  # last accepted stamp carried across segments
        self._cycles_per_ps = params.mm_freq * 1e-12 / TWO_PI

    def _accept_prob(self, t: np.ndarray, dt: np.ndarray | None) -> np.ndarray:
        p = self.params
        cycles = t * self._cycles_per_ps
        mod = 1.0 + p.mm_depth * np.cos(TWO_PI * (cycles - np.floor(cycles)))
        if dt is None:
            return mod / self.norm
        return g2_two_level(dt * 1e-12, p) * mod / self.norm

    def candidates(self, rng: np.random.Generator, t0: int, t1: int) -> np.ndarray:
        span = (t1 - t0) * 1e-12
        lam = self.envelope * span
        if lam <= 0:
            return np.empty(0, dtype=np.int64)
        scale = 1e12 / self.envelope
        n = int(lam + 6.0 * math.sqrt(lam) + 16)
        pos = np.cumsum(rng.exponential(scale, n))
        while pos[-1] < t1 - t0:
            more = np.cumsum(rng.exponential(scale, n)) + pos[-1]
            pos = np.concatenate([pos, more])
        pos = pos[pos < t1 - t0]
        return t0 + np.floor(pos).astype(np.int64)

    def thin(self, cand: np.ndarray, u: np.ndarray) -> np.ndarray:
        n = cand.size
        if n == 0:
            return cand
        # clusters: runs of candidates closer than the memory horizon; outside
        # a cluster the hazard no longer remembers the previous emission
        starts = np.ones(n, dtype=bool)
        starts[1:] = np.diff(cand) > self.memory
        s = np.flatnonzero(starts)
        e = np.append(s[1:], n)
        last = np.full(s.size, _NO_EVENT, dtype=np.int64)
        if self.last is not None and cand[0] - self.last <= self.memory:
            last[0] = self.last
        accept = np.zeros(n, dtype=bool)
        j = 0
        while s.size:
            i = s + j
            t = cand[i]
            seen = last != _NO_EVENT
            prob = np.empty(i.size)
            prob[~seen] = self._accept_prob(t[~seen], None)
            if np.any(seen):
                prob[seen] = self._accept_prob(t[seen], t[seen] - last[seen])
            acc = u[i] < prob
            accept[i] = acc
            last = np.where(acc, t, last)
            j += 1
            live = e - s > j
            s, e, last = s[live], e[live], last[live]
        out = cand[accept]
        if out.size:
            self.last = int(out[-1])
        return out


def iter_stream(
    params: EmitterParams, duration: float, seed: int, segment: float = DEFAULT_SEGMENT
) -> Iterator[tuple[int, int, np.ndarray]]:
    """Yield ``(start_ps, stop_ps, timestamps)`` for consecutive time segments."""
    validate_params(params)
    if duration < 0:
        raise ParameterError(f"duration must be >= 0, got {duration}")
    if not segment > 0:
        raise ParameterError(f"segment must be > 0, got {segment}")
    thinner = _Thinner(params)
    for k, t0, t1 in segment_bounds(to_ps(duration), to_ps(segment)):
        rng = segment_rng(seed, k)
        if thinner.envelope == 0:
            yield t0, t1, np.empty(0, dtype=np.int64)
            continue
        cand = thinner.candidates(rng, t0, t1)
        u = rng.random(cand.size)
        yield t0, t1, thinner.thin(cand, u)


def generate_stream(
    params: EmitterParams, duration: float, seed: int, segment: float = DEFAULT_SEGMENT
) -> PhotonStream:
    """Seeded antibunched emission stream over ``duration`` seconds."""
    parts = [ts for _, _, ts in iter_stream(params, duration, seed, segment)]
    ts = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    return PhotonStream(ts, float(duration), int(seed), float(segment))


def split_stream(
    tags: np.ndarray, probabilities: Sequence[float], rng: np.random.Generator
) -> list[np.ndarray]:
    """Route each photon to at most one output channel.

    This is the two-sided collection geometry: a photon leaves through lens A
    with probability ``p[0]``, lens B with ``p[1]``, and is lost otherwise.
    """
    p = np.asarray(probabilities, dtype=float)
    if np.any(p < 0) or p.sum() > 1.0 + 1e-12:
        raise ParameterError(f"routing probabilities must be >= 0 and sum to <= 1, got {p}")
    u = rng.random(tags.size)
    edges = np.cumsum(p)
    which = np.searchsorted(edges, u, side="right")
    return [tags[which == k] for k in range(p.size)]
