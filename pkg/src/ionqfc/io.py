"""Readers and writers for event, histogram and g2 files."""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ContractError

_LEN = struct.Struct("<Q")


def write_events_csv(path, channels: Mapping[str, np.ndarray]) -> None:
    """CSV ``channel,timestamp_ps``; channels written one after another."""
    with open(path, "w", newline="") as fh:
        fh.write("channel,timestamp_ps\n")
        for name, tags in channels.items():
            for t in np.asarray(tags, dtype=np.int64):
                fh.write(f"{name},{int(t)}\n")


def read_events_csv(path) -> dict[str, np.ndarray]:
    buckets: dict[str, list[int]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["channel", "timestamp_ps"]:
            raise ContractError(f"unexpected event CSV header {header!r}")
        for row in reader:
            buckets.setdefault(row[0], []).append(int(row[1]))
    return {k: np.asarray(v, dtype=np.int64) for k, v in buckets.items()}


def write_events_binary(path, tags: np.ndarray) -> None:
    """Length-prefixed little-endian uint64 picosecond stamps."""
    arr = np.asarray(tags, dtype=np.int64)
    if arr.size and arr.min() < 0:
        raise ContractError("negative timestamps cannot be stored as unsigned")
    with open(path, "wb") as fh:
        fh.write(_LEN.pack(arr.size))
        fh.write(arr.astype("<u8").tobytes())


def read_events_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _LEN.size:
        raise ContractError("binary event file too short for its length prefix")
    (n,) = _LEN.unpack_from(data)
    body = data[_LEN.size:]
    if len(body) != 8 * n:
        raise ContractError(f"length prefix says {n} stamps, file holds {len(body) // 8}")
    return np.frombuffer(body, dtype="<u8").astype(np.int64)


def write_rows(path, header: str, rows, fmt: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(fmt.format(*row) + "\n")


def write_histogram_csv(path, hist) -> None:
    write_rows(path, "tau_ns,counts", zip(hist.tau * 1e9, hist.counts.tolist()), "{:.4f},{:d}")


def write_g2_csv(path, curve) -> None:
    write_rows(path, "tau_ns,g2,g2_err", zip(curve.tau * 1e9, curve.g2, curve.g2_err), "{:.4f},{:.6g},{:.6g}")


def read_histogram_csv(path):
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0], arr[:, 1].astype(np.int64)


def _clean(obj, digits: int | None = 12):
    """JSON-safe copy; floats rounded to ``digits`` significant figures (``None`` keeps them exact)."""
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return None
        return obj if digits is None else float(f"{obj:.{digits}g}")
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item(), digits)
    if isinstance(obj, dict):
        return {k: _clean(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, digits) for v in obj]
    return obj


def write_json(path, obj, digits: int | None = 12) -> None:
    Path(path).write_text(json.dumps(_clean(obj, digits), indent=2, sort_keys=True) + "\n")
