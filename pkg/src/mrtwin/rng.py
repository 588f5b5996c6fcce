"""Seeded random streams with a fully pinned recurrence.

Twin synthesis must produce identical bytes no matter which language the
backend is written in, so nothing here may depend on a host RNG. The stream
is the splitmix64 recurrence; the exact constants and the derivation of
floats and bounded integers are documented in docs/protocol.md and are part
of the wire contract.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(value: int) -> int:
    """Finalizer of splitmix64: a bijective scramble of a 64-bit word."""
    z = value & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential splitmix64 stream seeded with a 64-bit value."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        return mix64(self._state)

    def next_float(self) -> float:
        # top 53 bits, uniform in [0, 1)
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def next_below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound). Plain modulo: the bias for any
        bound this package uses (pixel counts) is far below observability and
        the reduction is trivially portable."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound


def mix64_block(values: np.ndarray) -> np.ndarray:
    """Vectorized ``mix64`` over a uint64 array. Unsigned arithmetic wraps,
    which is exactly the mod-2^64 behavior the scalar path specifies."""
    z = values.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


def stream_block(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start+1 .. start+count`` of the SplitMix64 stream for
    ``seed``, as uint64. Output j of the stream is mix64(seed + j*gamma),
    so any block can be produced without stepping through predecessors."""
    j = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    states = np.uint64(seed & MASK64) + j * np.uint64(_GAMMA)
    return mix64_block(states)


def lattice_value(seed: int, gy: int, gx: int) -> float:
    """Stateless lattice sample in [-1, 1) for smooth-noise synthesis.

    Coordinates are folded into the seed with two odd multipliers before the
    splitmix64 finalizer, so any (seed, gy, gx) triple can be evaluated
    independently and in any order.
    """
    folded = (seed + gy * 0xC2B2AE3D27D4EB4F + gx * _GAMMA) & MASK64
    u = mix64(folded)
    return (u >> 11) * (2.0 ** -52) - 1.0
