"""Twin synthesis: builtin transforms, similarity, compliance-checked retries.

A transformation spec names one relation-specific recipe plus a seed. The
builtin backend executes three of them directly on pixels:

* background noise   -- smooth seeded luminance noise outside the lane band
* snow               -- seeded white speckles at a target density
* lane narrowing     -- horizontal squeeze of the scene toward the centerline

Everything else is declarative and needs an external generator process.
Generation is wrapped in a retry loop: a candidate twin must land inside the
operational domain and stay visually close to its source, otherwise the seed
is bumped and the attempt repeated.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Protocol

import numpy as np

from .errors import (
    BadSpec,
    DimensionMismatch,
    ExhaustedRetries,
    GeneratorReportedError,
    SourceOutOfDomain,
)
from .image import ImageBuffer
from .odd import ComplianceResult, OddSpec, within_domain
from .rng import MASK64, lattice_value, stream_block

# Builtin transform ids. External backends may advertise more.
IDENTITY = "identity"
MR1_BACKGROUND = "mr1.background"
MR2_SNOW = "mr2.snow"
MR3_LANE_NARROW = "mr3.lane_narrow"

MIN_DIMENSION = 64

# Fraction of the image width treated as the central lane band; background
# noise never touches it.
LANE_BAND_FRACTION = 0.4

_NOISE_CELL = 16  # lattice cell edge in pixels
_NOISE_SPAN = 64  # peak-to-zero pixel delta at amplitude 1.0


@dataclass(frozen=True)
class EnvDelta:
    """Environmental change: target weather and, for snow, speckle density."""

    weather: str | None = None
    density: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.density <= 1.0):
            raise ValueError(f"density must be in [0,1], got {self.density}")


@dataclass(frozen=True)
class GeomDelta:
    """Geometric change: lane-narrowing factor in (0, 1]."""

    lane_narrow: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.lane_narrow <= 1.0):
            raise ValueError(f"lane_narrow must be in (0,1], got {self.lane_narrow}")


@dataclass(frozen=True)
class SemDelta:
    """Semantic change. ``amplitude`` drives the builtin background noise;
    ``operation``/``argument``/``preserve`` describe declarative recipes for
    external backends (what to change and what must survive the change)."""

    amplitude: float = 0.0
    operation: str | None = None
    argument: str | None = None
    preserve: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not (0.0 <= self.amplitude <= 1.0):
            raise ValueError(f"amplitude must be in [0,1], got {self.amplitude}")


@dataclass(frozen=True)
class TransformationSpec:
    """One twin recipe: id, seed, and up to three delta groups."""

    id: str
    seed: int = 0
    environmental: EnvDelta | None = None
    geometric: GeomDelta | None = None
    semantic: SemDelta | None = None

    def __post_init__(self) -> None:
        if self.environmental is None and self.geometric is None and self.semantic is None:
            raise ValueError(f"spec {self.id!r} carries no delta")


def identity_spec(seed: int = 0) -> TransformationSpec:
    """A spec whose twin is the source, byte for byte."""
    return TransformationSpec(id=IDENTITY, seed=seed, semantic=SemDelta(amplitude=0.0))


def spec_to_wire(spec: TransformationSpec) -> dict:
    """JSON shape of a spec as sent to external generators. Field layout is
    part of the wire contract (docs/protocol.md); absent deltas are omitted."""
    out: dict = {"id": spec.id, "seed": spec.seed & MASK64}
    if spec.environmental is not None:
        out["environmental"] = {
            "weather": spec.environmental.weather,
            "density": spec.environmental.density,
        }
    if spec.geometric is not None:
        out["geometric"] = {"lane_narrow": spec.geometric.lane_narrow}
    if spec.semantic is not None:
        out["semantic"] = {
            "amplitude": spec.semantic.amplitude,
            "operation": spec.semantic.operation,
            "argument": spec.semantic.argument,
            "preserve": list(spec.semantic.preserve),
        }
    return out


def spec_from_wire(data: Mapping) -> TransformationSpec:
    env = data.get("environmental")
    geom = data.get("geometric")
    sem = data.get("semantic")
    return TransformationSpec(
        id=str(data["id"]),
        seed=int(data.get("seed", 0)),
        environmental=EnvDelta(env.get("weather"), env.get("density", 0.0)) if env else None,
        geometric=GeomDelta(geom.get("lane_narrow", 1.0)) if geom else None,
        semantic=SemDelta(
            sem.get("amplitude", 0.0),
            sem.get("operation"),
            sem.get("argument"),
            tuple(sem.get("preserve", ())),
        )
        if sem
        else None,
    )


def twin_tags(tags: Mapping[str, str], spec: TransformationSpec) -> dict[str, str]:
    """Tags a twin inherits: the source's, with declared weather overridden
    when the spec changes the weather."""
    out = dict(tags)
    if spec.environmental is not None and spec.environmental.weather:
        out["weather"] = spec.environmental.weather
    return out


def lane_band(width: int) -> tuple[int, int]:
    """[x0, x1) column range of the central lane band."""
    x0 = int(width * (0.5 - LANE_BAND_FRACTION / 2.0) + 0.5)
    x1 = int(width * (0.5 + LANE_BAND_FRACTION / 2.0) + 0.5)
    return x0, x1


def _smooth_noise_field(height: int, width: int, seed: int) -> np.ndarray:
    """Bilinear lattice noise in (-1, 1), float64, deterministic per seed."""
    rows = (height - 1) // _NOISE_CELL + 2
    cols = (width - 1) // _NOISE_CELL + 2
    nodes = np.empty((rows, cols), dtype=np.float64)
    for gy in range(rows):
        for gx in range(cols):
            nodes[gy, gx] = lattice_value(seed, gy, gx)
    ys = np.arange(height, dtype=np.float64) / _NOISE_CELL
    xs = np.arange(width, dtype=np.float64) / _NOISE_CELL
    iy = np.minimum(ys.astype(np.int64), rows - 2)
    ix = np.minimum(xs.astype(np.int64), cols - 2)
    ty = (ys - iy)[:, None]
    tx = (xs - ix)[None, :]
    n00 = nodes[iy][:, ix]
    n01 = nodes[iy][:, ix + 1]
    n10 = nodes[iy + 1][:, ix]
    n11 = nodes[iy + 1][:, ix + 1]
    return n00 * (1 - ty) * (1 - tx) + n01 * (1 - ty) * tx + n10 * ty * (1 - tx) + n11 * ty * tx


def _apply_background_noise(arr: np.ndarray, amplitude: float, seed: int) -> np.ndarray:
    h, w = arr.shape[:2]
    field_vals = _smooth_noise_field(h, w, seed)
    # round half away from zero is floor(x + 0.5) for the magnitudes here;
    # pinned explicitly so other implementations can match it
    delta = np.floor(field_vals * (amplitude * _NOISE_SPAN) + 0.5).astype(np.int64)
    x0, x1 = lane_band(w)
    delta[:, x0:x1] = 0
    out = arr.astype(np.int64) + delta[:, :, None]
    return np.clip(out, 0, 255).astype(np.uint8)


def speckle_count(density: float, height: int, width: int) -> int:
    """Number of speckled pixels for a density: round(density * pixels)."""
    return int(density * height * width + 0.5)


def _speckle_indices(seed: int, total: int, count: int) -> np.ndarray:
    """First ``count`` distinct values of (stream_j mod total), in stream
    order. Grows the consumed stream in blocks; the result is identical to
    walking the scalar stream one output at a time."""
    if count >= total:
        return np.arange(total, dtype=np.int64)
    consumed = 0
    stream = np.empty(0, dtype=np.int64)
    while True:
        block = max(1024, count)
        fresh = (stream_block(seed, consumed, block) % np.uint64(total)).astype(np.int64)
        consumed += block
        stream = np.concatenate([stream, fresh])
        uniq, first_pos = np.unique(stream, return_index=True)
        if len(uniq) >= count:
            order = np.argsort(first_pos)
            return uniq[order][:count]


def _apply_snow(arr: np.ndarray, density: float, seed: int) -> np.ndarray:
    h, w = arr.shape[:2]
    count = speckle_count(density, h, w)
    if count == 0:
        return arr
    idx = _speckle_indices(seed, h * w, count)
    out = arr.copy().reshape(h * w, 3)
    out[idx] = 255
    return out.reshape(h, w, 3)


def _apply_lane_narrow(arr: np.ndarray, factor: float) -> np.ndarray:
    h, w = arr.shape[:2]
    center = (w - 1) / 2.0
    xs = np.arange(w, dtype=np.float64)
    src_x = center + (xs - center) / factor
    idx = np.clip(np.floor(src_x + 0.5).astype(np.int64), 0, w - 1)
    return arr[:, idx, :]


def apply_builtin(source: ImageBuffer, spec: TransformationSpec) -> ImageBuffer:
    """Execute a spec with the builtin backend.

    Deltas compose in a fixed order (environmental, geometric, semantic) and
    each one is an exact no-op at its neutral value, so a spec whose deltas
    are all neutral returns the source bytes unchanged.
    """
    if source.height < MIN_DIMENSION or source.width < MIN_DIMENSION:
        raise BadSpec(
            f"frame {source.height}x{source.width} below minimum "
            f"{MIN_DIMENSION}x{MIN_DIMENSION}"
        )
    env, geom, sem = spec.environmental, spec.geometric, spec.semantic
    if env is not None and env.weather not in (None, "snow"):
        raise BadSpec(f"builtin backend cannot synthesize weather {env.weather!r}")
    if sem is not None and sem.operation is not None:
        raise BadSpec(f"operation {sem.operation!r} needs an external generator")

    arr = source.to_array()
    changed = False
    if env is not None and env.density > 0.0:
        arr = _apply_snow(arr, env.density, spec.seed)
        changed = True
    if geom is not None and geom.lane_narrow != 1.0:
        arr = _apply_lane_narrow(arr, geom.lane_narrow)
        changed = True
    if sem is not None and sem.amplitude > 0.0:
        arr = _apply_background_noise(arr, sem.amplitude, spec.seed)
        changed = True

    tags = twin_tags(source.tags, spec)
    if not changed:
        return ImageBuffer(source.height, source.width, source.data, tags)
    return ImageBuffer.from_array(arr, tags)


def image_similarity(a: ImageBuffer, b: ImageBuffer) -> float:
    """1 - (mean absolute sample difference / 255); 1.0 iff byte-identical."""
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionMismatch(
            f"{a.height}x{a.width} vs {b.height}x{b.width}"
        )
    xa = a.to_array().astype(np.int16)
    xb = b.to_array().astype(np.int16)
    return 1.0 - float(np.abs(xa - xb).mean()) / 255.0


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 5
    similarity_floor: float = 0.85

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if not (0.0 <= self.similarity_floor <= 1.0):
            raise ValueError("similarity_floor must be in [0,1]")


@dataclass(frozen=True)
class TwinResult:
    twin: ImageBuffer
    attempts: int
    similarity: float
    compliance: ComplianceResult


class TransformBackend(Protocol):
    """What the retry loop needs from an external generator session."""

    def request_transform(
        self, spec: TransformationSpec, input_path: Path, output_path: Path,
        params: Mapping[str, object] | None = None,
    ) -> Path: ...


def generate_compliant(
    source: ImageBuffer,
    spec: TransformationSpec,
    odd: OddSpec,
    policy: RetryPolicy = RetryPolicy(),
    backend: TransformBackend | None = None,
    params: Mapping[str, object] | None = None,
) -> TwinResult:
    """Produce a twin that is inside the domain and similar to its source.

    Attempt ``i`` (0-based) runs the spec with ``seed + i``; the first
    candidate that both satisfies the domain and clears the similarity floor
    wins. A backend error with status=error burns the attempt like a
    compliance failure does; transport-level failures propagate untouched.

    Raises SourceOutOfDomain before the first attempt if the source itself
    violates the domain, and ExhaustedRetries after ``max_attempts`` failed
    candidates.
    """
    source_check = within_domain(source, odd)
    if not source_check.compliant:
        raise SourceOutOfDomain(source_check.violated)

    last_violated: tuple[str, ...] = ()
    last_similarity: float | None = None
    for attempt in range(policy.max_attempts):
        seeded = replace(spec, seed=(spec.seed + attempt) & MASK64)
        try:
            if backend is None:
                candidate = apply_builtin(source, seeded)
            else:
                candidate = _external_candidate(backend, source, seeded, params)
        except GeneratorReportedError:
            last_violated = ("generator_error",)
            last_similarity = None
            continue
        check = within_domain(candidate, odd)
        similarity = image_similarity(source, candidate)
        if check.compliant and similarity >= policy.similarity_floor:
            return TwinResult(candidate, attempt + 1, similarity, check)
        last_violated = check.violated if not check.compliant else ("similarity_floor",)
        last_similarity = similarity
    raise ExhaustedRetries(policy.max_attempts, last_violated, last_similarity)


def _external_candidate(
    backend: TransformBackend,
    source: ImageBuffer,
    spec: TransformationSpec,
    params: Mapping[str, object] | None,
) -> ImageBuffer:
    with tempfile.TemporaryDirectory(prefix="mrtwin-gen-") as tmp:
        src_path = Path(tmp) / "source.png"
        out_path = Path(tmp) / "twin.png"
        source.save(src_path)
        produced = backend.request_transform(spec, src_path, out_path, params)
        twin = ImageBuffer.load(produced)
    return twin.with_tags(twin_tags(source.tags, spec))
