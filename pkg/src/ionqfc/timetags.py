"""Low-level helpers on integer-picosecond timestamp arrays."""

import numpy as np

from .errors import ContractError


def as_tags(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.int64)


def require_sorted(tags: np.ndarray, name: str = "record") -> None:
    if tags.size > 1 and np.any(np.diff(tags) < 0):
        raise ContractError(f"{name} timestamps are not sorted")


def resolve_collisions(tags: np.ndarray) -> np.ndarray:
    """Make a sorted array strictly increasing.

    Tied stamps are all kept; each later one is pushed to 1 ps after its
    predecessor, cascading if that creates a new tie.
    """
    if tags.size < 2:
        return tags
    idx = np.arange(tags.size, dtype=np.int64)
    return np.maximum.accumulate(tags - idx) + idx


def merge(*arrays: np.ndarray) -> np.ndarray:
    """Sorted, collision-free union of several tag arrays."""
    parts = [a for a in arrays if a.size]
    if not parts:
        return np.empty(0, dtype=np.int64)
    out = np.concatenate(parts)
    out.sort(kind="stable")
    return resolve_collisions(out)


def apply_dead_time(tags: np.ndarray, dead_ps: int, last_accepted=None) -> np.ndarray:
    """Non-paralyzable dead time on a sorted array.

    An event is dropped when it falls strictly less than ``dead_ps`` after the
    previous *accepted* event. ``last_accepted`` carries state in from an
    earlier segment.
    """
    if dead_ps <= 0 or tags.size == 0:
        return tags
    keep = np.ones(tags.size, dtype=bool)
    if last_accepted is not None:
        keep &= tags - last_accepted >= dead_ps
    # only events closer than dead_ps to their predecessor can be affected
    close = np.flatnonzero(np.diff(tags) < dead_ps) + 1
    if close.size == 0:
        return tags[keep]
    n = tags.size
    j = int(close[0]) - 1
    while j < n:
        if not keep[j]:
            j += 1
            continue
        k = int(np.searchsorted(tags, tags[j] + dead_ps, side="left"))
        keep[j + 1:k] = False
        # events from k up to the next close pair are all accepted
        pos = int(np.searchsorted(close, k, side="left"))
        if k >= n or pos >= close.size:
            break
        j = max(k, int(close[pos]) - 1)
    return tags[keep]
