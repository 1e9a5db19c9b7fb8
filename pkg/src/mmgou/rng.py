"""Counter-based random streams.

Every variate is a pure function of ``(seed, path index, source, counter)``,
so a Monte Carlo run gives the same numbers for a path no matter how paths
are batched or spread over threads.  The mixing function is the splitmix64
finalizer, evaluated on a Weyl sequence.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


class Source(IntEnum):
    """Independent sub-streams used inside one path."""

    HOLD = 0
    NEXT = 1
    BROWNIAN = 2
    LEVY_CLOCK = 3
    LEVY_PICK = 4
    LEVY_SIZE = 5
    SHOCK = 6
    INITIAL = 7
    V0 = 8
    AUX = 9


N_SOURCES = len(Source)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministically derive a child seed from ``seed`` and integer tags."""
    z = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    z = _mix(z + _GOLDEN)
    for tag in tags:
        t = np.array([int(tag) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        z = _mix(z ^ (t * _GOLDEN + _GOLDEN))
    return int(z[0])


def stream_keys(seed: int, path_ids: np.ndarray) -> np.ndarray:
    """Key matrix of shape ``(n_paths, N_SOURCES)``."""
    path_ids = np.asarray(path_ids, dtype=np.uint64).reshape(-1)
    base = _mix(np.full(path_ids.shape, np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
    per_path = _mix(base ^ _mix(path_ids * _GOLDEN + np.uint64(1)))
    src = np.arange(N_SOURCES, dtype=np.uint64)
    return _mix(per_path[:, None] + (src[None, :] + np.uint64(1)) * _M2)


def uniforms_at(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Open-interval uniforms for the given keys and counters (same shape)."""
    z = _mix(keys + (counters + np.uint64(1)) * _GOLDEN)
    return ((z >> _S11).astype(np.float64) + 0.5) * _INV53


class PathStreams:
    """Per-path counters over all sources for a batch of paths."""

    def __init__(self, seed: int, path_ids: np.ndarray):
        self.path_ids = np.asarray(path_ids, dtype=np.int64).reshape(-1)
        self.keys = stream_keys(seed, self.path_ids)
        self.counters = np.zeros_like(self.keys)

    def __len__(self) -> int:
        return len(self.path_ids)

    def uniform(self, source: Source, rows: np.ndarray | None = None, k: int = 1) -> np.ndarray:
        """Draw ``k`` uniforms per selected row; returns shape ``(len(rows), k)``."""
        if rows is None:
            rows = np.arange(len(self.path_ids))
        rows = np.asarray(rows)
        keys = self.keys[rows, int(source)]
        ctr = self.counters[rows, int(source)]
        offs = np.arange(k, dtype=np.uint64)
        out = uniforms_at(keys[:, None], ctr[:, None] + offs[None, :])
        self.counters[rows, int(source)] = ctr + np.uint64(k)
        return out

    def normal(self, source: Source, rows: np.ndarray | None = None, k: int = 1) -> np.ndarray:
        return ndtri(self.uniform(source, rows, k))

    def exponential(self, source: Source, rows: np.ndarray | None = None) -> np.ndarray:
        return -np.log(self.uniform(source, rows, 1)[:, 0])

    def subset(self, mask: np.ndarray) -> None:
        """Keep only the rows selected by ``mask`` (in place)."""
        self.path_ids = self.path_ids[mask]
        self.keys = self.keys[mask]
        self.counters = self.counters[mask]
