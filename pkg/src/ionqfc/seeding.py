"""Seed derivation shared by every stochastic stage.

All randomness in a run flows from one master seed. Each stage gets its own
stream by hashing its name together with the master seed, and long runs are
cut into fixed-length time segments whose generators are spawned from that
stage seed by segment index. Output therefore depends only on
``(master_seed, segment_length)``, never on execution order.
"""

import hashlib

import numpy as np

SECONDS_TO_PS = 1e12


def derive_seed(master_seed: int, name: str) -> int:
    """Deterministic 63-bit seed for stage ``name`` under ``master_seed``."""
    digest = hashlib.sha256(f"{int(master_seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def segment_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for time segment ``index`` of a stage seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def to_ps(seconds: float) -> int:
    return int(round(seconds * SECONDS_TO_PS))


def segment_bounds(duration_ps: int, segment_ps: int):
    """Yield ``(index, start_ps, stop_ps)`` covering ``[0, duration_ps]``."""
    if duration_ps <= 0:
        return
    n = -(-duration_ps // segment_ps)
    for k in range(n):
        yield k, k * segment_ps, min((k + 1) * segment_ps, duration_ps)
