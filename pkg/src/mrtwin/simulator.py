"""Deterministic schematic road scenes with exact lane geometry.

Frames are flat dark road with two bright lane lines drawn as a head-on
schematic (no perspective), so the lane centre is a known quantity per frame
and the builtin lane follower can be checked against it in closed form. A
script fixes everything: track curvature drifts the centre, hazards shove it
sideways, and a sufficiently violent shove is recorded as a crash a fixed lag
after onset, once the vehicle has visibly left its lane.

Rendering is a pure function of (script, frame index); two runs of the same
script produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigInvalid, IoFailure, OutOfRange
from .evaluation import GroundTruth
from .image import ImageBuffer
from .serialize import canonical_float, dumps as canonical_dumps

FRAME_HEIGHT = 128
FRAME_WIDTH = 256

# Flat grey levels chosen so a daytime frame's mean luminance sits around
# 0.39, inside both the default lighting bounds and the stricter [0.3, 0.9]
# daytime window, while nothing but lane markings crosses the follower's
# brightness threshold.
SKY_LEVEL = 120
ROAD_LEVEL = 70
LANE_LEVEL = 255
LANE_HALF_WIDTH = 0.09  # lane line offset from centre, as a width fraction
LINE_THICKNESS = 5      # columns per lane line, odd so lines centre on their anchor

# Lane centre is clamped so both lines stay fully on screen at every
# magnitude a script can produce; a clipped line would drag the measured
# centroid off the true centre.
CX_MIN = 0.1
CX_MAX = 0.9

LANE_SHIFT = "lane_shift"
MAX_SHIFT = 0.4

DEFAULT_CRASH_THRESHOLD = 0.3


@dataclass(frozen=True)
class TrackSegment:
    """Constant-curvature stretch. Curvature is lane-centre drift in width
    fractions per second; positive drifts right."""

    duration_s: float
    curvature: float = 0.0
    weather: str = "clear"

    def __post_init__(self) -> None:
        if self.duration_s <= 0.0:
            raise ValueError("segment duration must be positive")


@dataclass(frozen=True)
class Hazard:
    """Sideways shove of the lane centre starting at ``time_s``."""

    time_s: float
    kind: str = LANE_SHIFT
    magnitude: float = 0.0

    def __post_init__(self) -> None:
        if self.kind != LANE_SHIFT:
            raise ValueError(f"unknown hazard kind {self.kind!r}")
        if not (0.0 <= self.magnitude <= MAX_SHIFT):
            raise ValueError(f"magnitude must be in [0, {MAX_SHIFT}], got {self.magnitude}")


@dataclass(frozen=True)
class ScenarioScript:
    """Complete description of one simulated drive."""

    length_s: float
    frame_rate: int = 10
    seed: int = 0
    segments: tuple[TrackSegment, ...] = ()
    hazards: tuple[Hazard, ...] = ()
    recovery_s: float = 4.0
    crash_lag_s: float = 2.0
    crash_threshold: float = DEFAULT_CRASH_THRESHOLD

    def __post_init__(self) -> None:
        if self.length_s <= 0.0:
            raise ValueError("length_s must be positive")
        if self.frame_rate < 1:
            raise ValueError("frame_rate must be at least 1")
        if self.crash_lag_s < 0.0 or self.recovery_s <= 0.0:
            raise ValueError("recovery_s must be positive and crash_lag_s non-negative")
        for hazard in self.hazards:
            if not (0.0 <= hazard.time_s < self.length_s):
                raise ValueError(f"hazard at {hazard.time_s}s outside [0, {self.length_s})")

    @property
    def frame_count(self) -> int:
        return int(round(self.length_s * self.frame_rate))

    def timestamp(self, index: int) -> float:
        return index / self.frame_rate


def _base_centre(script: ScenarioScript, t: float) -> float:
    """Lane centre from curvature alone, before hazards."""
    cx = 0.5
    elapsed = 0.0
    for segment in script.segments:
        overlap = max(0.0, min(t, elapsed + segment.duration_s) - elapsed)
        cx += segment.curvature * overlap
        elapsed += segment.duration_s
        if t <= elapsed:
            break
    return cx


def _shift(script: ScenarioScript, t: float) -> float:
    total = 0.0
    for hazard in script.hazards:
        if hazard.time_s <= t < hazard.time_s + script.recovery_s:
            total += hazard.magnitude
    return total


def lane_centre(script: ScenarioScript, t: float) -> float:
    """True lane centre at time t, as a width fraction, clamped on-screen."""
    cx = _base_centre(script, t) + _shift(script, t)
    return min(CX_MAX, max(CX_MIN, cx))


def weather_at(script: ScenarioScript, t: float) -> str:
    elapsed = 0.0
    weather = "clear"
    for segment in script.segments:
        weather = segment.weather
        elapsed += segment.duration_s
        if t < elapsed:
            break
    return weather


def _lane_columns(cx: float, width: int) -> Iterable[int]:
    for offset in (-LANE_HALF_WIDTH, LANE_HALF_WIDTH):
        anchor = int((cx + offset) * (width - 1) + 0.5)
        for col in range(anchor - LINE_THICKNESS // 2, anchor + LINE_THICKNESS // 2 + 1):
            if 0 <= col < width:
                yield col


def render_frame(script: ScenarioScript, index: int) -> ImageBuffer:
    """Draw frame ``index``: sky over flat road, two bright lane lines on the
    road half, weather tag."""
    t = script.timestamp(index)
    cx = lane_centre(script, t)
    arr = np.full((FRAME_HEIGHT, FRAME_WIDTH, 3), ROAD_LEVEL, dtype=np.uint8)
    arr[: FRAME_HEIGHT // 2, :, :] = SKY_LEVEL
    for col in _lane_columns(cx, FRAME_WIDTH):
        arr[FRAME_HEIGHT // 2:, col, :] = LANE_LEVEL
    return ImageBuffer.from_array(arr, {"weather": weather_at(script, t)})


def render_mask(script: ScenarioScript, index: int) -> np.ndarray:
    """Single-channel lane mask matching ``render_frame``."""
    cx = lane_centre(script, script.timestamp(index))
    mask = np.zeros((FRAME_HEIGHT, FRAME_WIDTH), dtype=np.uint8)
    for col in _lane_columns(cx, FRAME_WIDTH):
        mask[FRAME_HEIGHT // 2:, col] = 255
    return mask


def inject_hazard(script: ScenarioScript, hazard: Hazard) -> ScenarioScript:
    """New script with one more hazard; the original is untouched."""
    if not (0.0 <= hazard.time_s < script.length_s):
        raise OutOfRange(
            f"hazard at {hazard.time_s}s outside [0, {script.length_s})"
        )
    return replace(script, hazards=script.hazards + (hazard,))


def crash_times(script: ScenarioScript) -> tuple[float, ...]:
    """Crash timestamps: one per hazard at or above the crash threshold,
    ``crash_lag_s`` after onset, snapped onto the frame grid and capped at
    the final frame."""
    last = script.timestamp(script.frame_count - 1)
    times = set()
    for hazard in script.hazards:
        if hazard.magnitude >= script.crash_threshold:
            t = round((hazard.time_s + script.crash_lag_s) * script.frame_rate) / script.frame_rate
            times.add(min(t, last))
    return tuple(sorted(times))


def ground_truth(script: ScenarioScript, sequence_id: str | None = None) -> GroundTruth:
    return GroundTruth(
        sequence_id or script_id(script),
        span=(0.0, script.length_s),
        frame_rate=float(script.frame_rate),
        crash_times=crash_times(script),
    )


def script_id(script: ScenarioScript) -> str:
    digest = hashlib.sha256(canonical_dumps(script_to_dict(script)).encode()).hexdigest()
    return f"seq-{script.seed}-{digest[:8]}"


def script_to_dict(script: ScenarioScript) -> dict:
    return {
        "length_s": canonical_float(script.length_s),
        "frame_rate": script.frame_rate,
        "seed": script.seed,
        "recovery_s": canonical_float(script.recovery_s),
        "crash_lag_s": canonical_float(script.crash_lag_s),
        "crash_threshold": canonical_float(script.crash_threshold),
        "segments": [
            {
                "duration_s": canonical_float(s.duration_s),
                "curvature": canonical_float(s.curvature),
                "weather": s.weather,
            }
            for s in script.segments
        ],
        "hazards": [
            {
                "time_s": canonical_float(h.time_s),
                "kind": h.kind,
                "magnitude": canonical_float(h.magnitude),
            }
            for h in script.hazards
        ],
    }


def script_from_dict(data: dict) -> ScenarioScript:
    try:
        return ScenarioScript(
            length_s=float(data["length_s"]),
            frame_rate=int(data.get("frame_rate", 10)),
            seed=int(data.get("seed", 0)),
            segments=tuple(
                TrackSegment(float(s["duration_s"]), float(s.get("curvature", 0.0)),
                             str(s.get("weather", "clear")))
                for s in data.get("segments", ())
            ),
            hazards=tuple(
                Hazard(float(h["time_s"]), str(h.get("kind", LANE_SHIFT)),
                       float(h.get("magnitude", 0.0)))
                for h in data.get("hazards", ())
            ),
            recovery_s=float(data.get("recovery_s", 4.0)),
            crash_lag_s=float(data.get("crash_lag_s", 2.0)),
            crash_threshold=float(data.get("crash_threshold", DEFAULT_CRASH_THRESHOLD)),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigInvalid(f"invalid scenario script: {err}") from err


def generate_sequence(script: ScenarioScript, out_dir: str | Path) -> Path:
    """Write frames, masks, metadata, and ground truth under ``out_dir``.

    Layout:
        frames/frame_NNNNNN.png   camera frames
        masks/frame_NNNNNN.png    lane masks
        metadata.csv              frame_id, timestamp_s, weather, cx_true
        ground_truth.csv          sequence_id, crash_time_s
        sequence.json             span, rate, script echo
    """
    from PIL import Image

    out_dir = Path(out_dir)
    sequence_id = script_id(script)
    try:
        (out_dir / "frames").mkdir(parents=True, exist_ok=True)
        (out_dir / "masks").mkdir(parents=True, exist_ok=True)
        rows = []
        for index in range(script.frame_count):
            frame_id = f"frame_{index:06d}"
            t = script.timestamp(index)
            render_frame(script, index).save(out_dir / "frames" / f"{frame_id}.png")
            Image.fromarray(render_mask(script, index)).save(out_dir / "masks" / f"{frame_id}.png")
            rows.append((frame_id, t, weather_at(script, t), lane_centre(script, t)))

        with (out_dir / "metadata.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame_id", "timestamp_s", "weather", "cx_true"])
            for frame_id, t, weather, cx in rows:
                writer.writerow([frame_id, format(t, ".3f"), weather, format(cx, ".6f")])

        truth = ground_truth(script, sequence_id)
        with (out_dir / "ground_truth.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sequence_id", "crash_time_s"])
            for t in truth.crash_times:
                writer.writerow([sequence_id, format(t, ".3f")])

        manifest = {
            "sequence_id": sequence_id,
            "span": [canonical_float(0.0), canonical_float(script.length_s)],
            "frame_rate": script.frame_rate,
            "frames": script.frame_count,
            "script": script_to_dict(script),
        }
        (out_dir / "sequence.json").write_text(canonical_dumps(manifest) + "\n")
    except OSError as err:
        raise IoFailure(f"cannot write sequence under {out_dir}: {err}") from err
    return out_dir


def load_manifest(sequence_dir: str | Path) -> dict:
    path = Path(sequence_dir) / "sequence.json"
    try:
        return json.loads(path.read_text())
    except OSError as err:
        raise IoFailure(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigInvalid(f"{path} is not valid JSON: {err}") from err


def lane_span_px(image: ImageBuffer) -> float | None:
    """Oracle: distance in pixels between the outermost bright columns in the
    lower half, or None when nothing bright is visible."""
    luma = image.luminance()[image.height // 2:, :]
    bright_cols = np.nonzero((luma > 200.0).any(axis=0))[0]
    if len(bright_cols) == 0:
        return None
    return float(bright_cols[-1] - bright_cols[0])
