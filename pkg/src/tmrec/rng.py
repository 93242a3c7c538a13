"""Counter-based random streams shared by every training backend.

Draw ``n`` of a stream is a pure function of ``(stream_seed, n)``: the
splitmix64 finalizer applied to ``seed + (n + 1) * GOLDEN`` (mod 2**64).
Because draws are addressable, the vectorized NumPy backend and the
compiled backend consume exactly the same values in the same order, and
training is bit-reproducible regardless of backend or batching.

Each class of a multi-class model gets its own stream (plus one extra
selector stream), so updates to disjoint class banks could run in any
order or in parallel without changing the result.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, stream_id: int) -> int:
    """Derive the seed of an independent stream from the master seed."""
    return mix64((master_seed + (stream_id + 1) * GOLDEN) & MASK64)


def uniform_scalar(seed: int, index: int) -> float:
    """Draw ``index`` of the stream, as a float64 in [0, 1)."""
    z = mix64((seed + ((index + 1) * GOLDEN)) & MASK64)
    return (z >> 11) * _INV_2_53


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def uniform_block(seed: int, start: int, count: int) -> np.ndarray:
    """Draws ``start .. start + count - 1`` of the stream as float64 in [0, 1)."""
    idx = np.arange(start + 1, start + 1 + count, dtype=np.uint64)
    z = _mix64_array(np.uint64(seed & MASK64) + idx * np.uint64(GOLDEN))
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53


def uniform_at(seed: int, indices: np.ndarray) -> np.ndarray:
    """Draws at arbitrary ``indices`` of the stream (any array shape)."""
    idx = indices.astype(np.uint64) + np.uint64(1)
    z = _mix64_array(np.uint64(seed & MASK64) + idx * np.uint64(GOLDEN))
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53
