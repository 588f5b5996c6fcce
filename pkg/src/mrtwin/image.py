"""8-bit RGB frame buffer with PNG round-tripping.

Images are stored as immutable row-major bytes so twins can be compared and
hashed without worrying about aliasing; numpy views are created on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image

CHANNELS = 3

# Rec. 601 luma weights; used for every luminance-based measurement.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded camera frame: height x width x 3, 8 bits per sample.

    ``tags`` carries declared per-frame metadata (weather, time of day, link
    state) that cannot be measured from pixels. Treat it as read-only.
    """

    height: int
    width: int
    data: bytes
    tags: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ValueError("image dimensions must be positive")
        if len(self.data) != self.height * self.width * CHANNELS:
            raise ValueError(
                f"buffer holds {len(self.data)} bytes, expected "
                f"{self.height * self.width * CHANNELS}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray, tags: Mapping[str, str] | None = None) -> "ImageBuffer":
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, np.newaxis], CHANNELS, axis=2)
        if arr.ndim != 3 or arr.shape[2] != CHANNELS:
            raise ValueError(f"expected HxWx{CHANNELS} array, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        return cls(arr.shape[0], arr.shape[1], arr.tobytes(), dict(tags or {}))

    @classmethod
    def filled(cls, height: int, width: int, value: int, tags: Mapping[str, str] | None = None) -> "ImageBuffer":
        return cls(height, width, bytes([value]) * (height * width * CHANNELS), dict(tags or {}))

    @classmethod
    def load(cls, path: str | Path, tags: Mapping[str, str] | None = None) -> "ImageBuffer":
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"))
        return cls.from_array(arr, tags)

    def to_array(self) -> np.ndarray:
        """Read-only HxWx3 uint8 view over the buffer."""
        arr = np.frombuffer(self.data, dtype=np.uint8).reshape(self.height, self.width, CHANNELS)
        arr.flags.writeable = False
        return arr

    def luminance(self) -> np.ndarray:
        """HxW float64 luma plane in [0, 255]."""
        return self.to_array().astype(np.float64) @ _LUMA

    def with_tags(self, tags: Mapping[str, str]) -> "ImageBuffer":
        return replace(self, tags=dict(tags))

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(self.to_array()).save(path, format="PNG")
        return path


def png_size(path: str | Path) -> tuple[int, int]:
    """(height, width) of a PNG without decoding the pixel data."""
    with Image.open(path) as img:
        return img.height, img.width
