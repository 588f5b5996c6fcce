"""Trailing-window smoothing and uncertainty over steering streams.

Smoothing is a plain windowed mean and uncertainty is the population variance
of the window; both are computed with compensated summation so results track
exact arithmetic to well below the comparison tolerances used anywhere else
in the harness.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .errors import EmptyWindow, SizeMismatch


class SlidingWindow:
    """Fixed-capacity trailing window of scalar predictions.

    ``size`` is the nominal capacity; until warm-up completes the window
    holds fewer samples and operations use whatever is present.
    """

    def __init__(self, size: int):
        if size < 1:
            raise ValueError(f"window size must be >= 1, got {size}")
        self.size = size
        self._values: deque[float] = deque(maxlen=size)

    def push(self, value: float) -> None:
        self._values.append(float(value))

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(self._values)

    def __len__(self) -> int:
        return len(self._values)


@dataclass(frozen=True)
class UncertaintyEstimate:
    value: float
    sample_count: int


def smooth(window: SlidingWindow) -> float:
    """Mean of the current window contents."""
    if len(window) == 0:
        raise EmptyWindow("cannot smooth an empty window")
    return math.fsum(window.values) / len(window)


def estimate_uncertainty(window: SlidingWindow) -> UncertaintyEstimate:
    """Population variance of the window; 0.0 for fewer than two samples."""
    n = len(window)
    if n == 0:
        return UncertaintyEstimate(0.0, 0)
    if n == 1:
        return UncertaintyEstimate(0.0, 1)
    values = window.values
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return UncertaintyEstimate(var, n)


def validate_temporal(source: SlidingWindow, twin: SlidingWindow, epsilon_t: float) -> bool:
    """True when the smoothed streams agree to within ``epsilon_t``."""
    if len(source) == 0 or len(twin) == 0:
        raise EmptyWindow("temporal validation needs samples in both windows")
    if source.size != twin.size:
        raise SizeMismatch(f"window sizes differ: {source.size} vs {twin.size}")
    return abs(smooth(source) - smooth(twin)) <= epsilon_t
