"""System-under-test access: a deterministic builtin lane follower plus a
handle that can also front an external process speaking the wire protocol.

The builtin stub steers toward the centroid of bright road markings in the
lower half of the frame. It exists so every pipeline path can be exercised
hermetically; it is intentionally simple enough to reason about in closed
form.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .image import ImageBuffer

# A sample is "bright" when its luma exceeds this 8-bit level.
BRIGHT_LEVEL = 200.0


@dataclass(frozen=True)
class Prediction:
    """One driving decision for one frame. ``clamped`` records that an
    external SUT reported steering outside [-1, 1] and the value was pulled
    back to the boundary."""

    frame_id: str
    steering: float
    throttle: float | None = None
    latency_ms: float = 0.0
    clamped: bool = False


def stub_steering(image: ImageBuffer) -> float:
    """Steering in [-1, 1]: proportional control toward the bright-pixel
    centroid of the lower half; 0.0 when the lower half has no bright pixels."""
    luma = image.luminance()
    lower = luma[image.height // 2:, :]
    bright = lower > BRIGHT_LEVEL
    count = int(bright.sum())
    if count == 0:
        return 0.0
    cols = np.nonzero(bright)[1]
    centroid = float(cols.sum()) / count / (image.width - 1)
    return float(np.clip(2.0 * (centroid - 0.5), -1.0, 1.0))


class PredictSession(Protocol):
    """What an external SUT session must provide (see genproto)."""

    def request_predict(self, input_path: Path) -> tuple[float, float | None]: ...


class SutHandle:
    """Uniform prediction interface over the stub or an external process."""

    def __init__(self, session: PredictSession | None = None):
        self._session = session

    @classmethod
    def stub(cls) -> "SutHandle":
        return cls(None)

    @classmethod
    def external(cls, session: PredictSession) -> "SutHandle":
        return cls(session)

    def predict(self, image: ImageBuffer, frame_id: str) -> Prediction:
        started = time.perf_counter()
        if self._session is None:
            steering, throttle, clamped = stub_steering(image), None, False
        else:
            with tempfile.TemporaryDirectory(prefix="mrtwin-sut-") as tmp:
                path = Path(tmp) / "frame.png"
                image.save(path)
                raw_steering, throttle = self._session.request_predict(path)
            clamped = not (-1.0 <= raw_steering <= 1.0)
            steering = min(1.0, max(-1.0, raw_steering))
        latency_ms = (time.perf_counter() - started) * 1000.0
        return Prediction(frame_id, steering, throttle, latency_ms, clamped)

    def close(self) -> None:
        if self._session is not None:
            close = getattr(self._session, "close", None)
            if close is not None:
                close()
