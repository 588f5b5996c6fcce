"""Per-frame validation: twin, predictions, relation, temporal check, report.

For every (frame, relation) pair the pipeline synthesizes a compliant twin,
obtains the SUT's decision on both images, and validates the relation plus
the smoothed temporal agreement of the two streams. The relation's
uncertainty gate is fed the twin stream's variance in excess of the source
stream's, so uncertainty the transform did not introduce (a curvy road, a
hazard reaction shared by both streams) never trips it; both raw variances
are recorded for inspection.

Relation failures and temporal failures raise an alarm on the record. Frames
whose twin or prediction could not be produced are marked unevaluable and
never alarm; a failing backend degrades coverage, not correctness.

Distinct relations are independent and may run in parallel; each worker owns
its own SUT handle and generator session, and the assembled report orders
records canonically so the output is identical at any worker count.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import (
    ConfigInvalid,
    ExhaustedRetries,
    GeneratorTimeout,
    GeneratorUnavailable,
    IoFailure,
    MalformedResponse,
    NoFrames,
    SourceOutOfDomain,
    SutCrashed,
    SutTimeout,
    UnsupportedTransform,
)
from .image import ImageBuffer
from .odd import OddSpec
from .relations import MrDefinition, RelationOutcome, id_sort_key, validate_relation
from .serialize import canonical_float, dumps as canonical_dumps
from .sut import SutHandle
from .temporal import SlidingWindow, UncertaintyEstimate, estimate_uncertainty, validate_temporal
from .transforms import RetryPolicy, TransformBackend, TwinResult, generate_compliant
from .rng import MASK64

DEFAULT_WINDOW = 15
DEFAULT_EPSILON_T = 0.1


@dataclass(frozen=True)
class Frame:
    """Timestamped camera frame as the pipeline consumes it."""

    frame_id: str
    timestamp: float
    image: ImageBuffer


@dataclass(frozen=True)
class TwinMeta:
    attempts: int
    similarity: float
    compliant: bool
    violated: tuple[str, ...] = ()


@dataclass(frozen=True)
class FrameRecord:
    """Outcome of one (frame, relation) evaluation.

    ``alarm`` is only ever true on evaluable records; an unevaluable frame
    carries its reason code instead.
    """

    frame_id: str
    timestamp: float
    mr_id: str
    relation: RelationOutcome | None
    temporal_ok: bool | None
    source_uncertainty: UncertaintyEstimate | None
    twin_uncertainty: UncertaintyEstimate | None
    twin: TwinMeta | None
    alarm: bool
    unevaluable: bool = False
    reason: str | None = None
    sut_clamped: bool = False

    def __post_init__(self) -> None:
        if self.alarm and self.unevaluable:
            raise ValueError("an unevaluable record cannot alarm")


@dataclass(frozen=True)
class ValidationReport:
    run_id: str
    generated_at: str
    config: Mapping
    records: tuple[FrameRecord, ...]
    totals: Mapping[str, int]


TwinSink = Callable[[str, Frame, TwinResult], None]

# reason codes for unevaluable records
_GENERATION_FAILURES: tuple[tuple[type, str], ...] = (
    (SourceOutOfDomain, "source_out_of_domain"),
    (ExhaustedRetries, "exhausted_retries"),
    (GeneratorUnavailable, "generator_unavailable"),
    (GeneratorTimeout, "generator_timeout"),
    (MalformedResponse, "malformed_response"),
)
_GENERATION_ERROR_TYPES = tuple(cls for cls, _ in _GENERATION_FAILURES)


def run_sequence(
    frames: Sequence[Frame],
    definitions: Sequence[MrDefinition],
    odd: OddSpec,
    *,
    base_seed: int = 0,
    window: int = DEFAULT_WINDOW,
    epsilon_t: float = DEFAULT_EPSILON_T,
    policy: RetryPolicy = RetryPolicy(),
    sut_factory: Callable[[], SutHandle] | None = None,
    generator_factory: Callable[[], TransformBackend] | None = None,
    generator_params: Mapping[str, object] | None = None,
    jobs: int = 1,
    run_id: str | None = None,
    config_snapshot: Mapping | None = None,
    twin_sink: TwinSink | None = None,
) -> ValidationReport:
    """Validate every relation over the full sequence and assemble a report.

    ``sut_factory``/``generator_factory`` are invoked once per worker so
    parallel workers never share a session; passing None selects the builtin
    stub and the builtin transform backend respectively.
    """
    if not frames:
        raise NoFrames("sequence is empty")
    if epsilon_t <= 0.0:
        raise ConfigInvalid(f"epsilon_t must be positive, got {epsilon_t}")
    if window < 1:
        raise ConfigInvalid(f"window must be at least 1, got {window}")
    if jobs < 1:
        raise ConfigInvalid(f"jobs must be at least 1, got {jobs}")
    for earlier, later in zip(frames, frames[1:]):
        if later.timestamp < earlier.timestamp:
            raise ConfigInvalid(
                f"frames out of order: {later.frame_id} at {later.timestamp} "
                f"follows {earlier.frame_id} at {earlier.timestamp}"
            )
    if generator_factory is None:
        for defn in definitions:
            if not defn.executable:
                raise UnsupportedTransform(
                    f"{defn.id} is declarative; the builtin backend cannot execute it"
                )

    def run_one(defn: MrDefinition) -> list[FrameRecord]:
        return _run_relation(
            frames, defn, odd,
            base_seed=base_seed, window=window, epsilon_t=epsilon_t, policy=policy,
            sut_factory=sut_factory, generator_factory=generator_factory,
            generator_params=generator_params, twin_sink=twin_sink,
        )

    ordered = sorted(definitions, key=lambda d: id_sort_key(d.id))
    if jobs == 1 or len(ordered) == 1:
        per_mr = [run_one(defn) for defn in ordered]
    else:
        with ThreadPoolExecutor(max_workers=min(jobs, len(ordered))) as pool:
            per_mr = list(pool.map(run_one, ordered))

    records = tuple(record for block in per_mr for record in block)
    totals = {
        "frames": len(frames),
        "records": len(records),
        "alarms": sum(1 for r in records if r.alarm),
        "unevaluable": sum(1 for r in records if r.unevaluable),
    }
    return ValidationReport(
        run_id=run_id or fresh_run_id(),
        generated_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        config=dict(config_snapshot or {}),
        records=records,
        totals=totals,
    )


def fresh_run_id() -> str:
    return f"run-{time.strftime('%Y%m%dT%H%M%SZ', time.gmtime())}-{os.urandom(3).hex()}"


def _run_relation(
    frames: Sequence[Frame],
    defn: MrDefinition,
    odd: OddSpec,
    *,
    base_seed: int,
    window: int,
    epsilon_t: float,
    policy: RetryPolicy,
    sut_factory: Callable[[], SutHandle] | None,
    generator_factory: Callable[[], TransformBackend] | None,
    generator_params: Mapping[str, object] | None,
    twin_sink: TwinSink | None,
) -> list[FrameRecord]:
    sut = sut_factory() if sut_factory is not None else SutHandle.stub()
    backend = generator_factory() if generator_factory is not None else None
    if backend is not None:
        advertised = getattr(backend, "capabilities", None)
        if advertised is not None and defn.transform.id not in advertised:
            raise UnsupportedTransform(
                f"{defn.transform.id!r} not offered by the generator "
                f"(capabilities: {list(advertised)})"
            )
    source_window = SlidingWindow(window)
    twin_window = SlidingWindow(window)
    records: list[FrameRecord] = []
    try:
        for index, frame in enumerate(frames):
            spec = replace(defn.transform, seed=(base_seed ^ index) & MASK64)

            try:
                result = generate_compliant(
                    frame.image, spec, odd, policy, backend=backend, params=generator_params
                )
            except _GENERATION_ERROR_TYPES as err:
                records.append(_unevaluable(frame, defn, _reason_for(err)))
                continue

            try:
                source_pred = sut.predict(frame.image, frame.frame_id)
                twin_pred = sut.predict(result.twin, frame.frame_id)
            except (SutTimeout, SutCrashed) as err:
                reason = "sut_timeout" if isinstance(err, SutTimeout) else "sut_crashed"
                records.append(_unevaluable(frame, defn, reason))
                continue

            source_window.push(source_pred.steering)
            twin_window.push(twin_pred.steering)
            source_u = estimate_uncertainty(source_window)
            twin_u = estimate_uncertainty(twin_window)
            # gate on what the transform added, not on shared roadway dynamics
            excess = max(0.0, twin_u.value - source_u.value)
            relation = validate_relation(defn, source_pred, twin_pred, excess)
            temporal_ok = validate_temporal(source_window, twin_window, epsilon_t)
            alarm = (not relation.passed) or (not temporal_ok)

            if twin_sink is not None:
                twin_sink(defn.id, frame, result)

            records.append(FrameRecord(
                frame_id=frame.frame_id,
                timestamp=canonical_float(frame.timestamp),
                mr_id=defn.id,
                relation=_canonical_relation(relation),
                temporal_ok=temporal_ok,
                source_uncertainty=_canonical_estimate(source_u),
                twin_uncertainty=_canonical_estimate(twin_u),
                twin=TwinMeta(
                    attempts=result.attempts,
                    similarity=canonical_float(result.similarity),
                    compliant=result.compliance.compliant,
                    violated=result.compliance.violated,
                ),
                alarm=alarm,
                sut_clamped=source_pred.clamped or twin_pred.clamped,
            ))
    finally:
        sut.close()
        if backend is not None:
            close = getattr(backend, "close", None)
            if close is not None:
                close()
    return records


def _reason_for(err: Exception) -> str:
    for cls, reason in _GENERATION_FAILURES:
        if isinstance(err, cls):
            return reason
    raise AssertionError(f"unmapped failure {type(err).__name__}")


def _unevaluable(frame: Frame, defn: MrDefinition, reason: str) -> FrameRecord:
    return FrameRecord(
        frame_id=frame.frame_id,
        timestamp=canonical_float(frame.timestamp),
        mr_id=defn.id,
        relation=None,
        temporal_ok=None,
        source_uncertainty=None,
        twin_uncertainty=None,
        twin=None,
        alarm=False,
        unevaluable=True,
        reason=reason,
    )


def _canonical_relation(relation: RelationOutcome) -> RelationOutcome:
    return replace(
        relation,
        source_value=canonical_float(relation.source_value),
        twin_value=canonical_float(relation.twin_value),
        distance=canonical_float(relation.distance),
        epsilon=canonical_float(relation.epsilon),
    )


def _canonical_estimate(estimate: UncertaintyEstimate) -> UncertaintyEstimate:
    return UncertaintyEstimate(canonical_float(estimate.value), estimate.sample_count)


def derive_alarms(report: ValidationReport, mr_id: str | None = None) -> list[tuple[str, float]]:
    """(mr_id, timestamp) of every alarm, sorted by time then id."""
    out = [
        (record.mr_id, record.timestamp)
        for record in report.records
        if record.alarm and (mr_id is None or record.mr_id == mr_id)
    ]
    out.sort(key=lambda pair: (pair[1], id_sort_key(pair[0])))
    return out


def alarm_times(report: ValidationReport, mr_id: str) -> list[float]:
    return [timestamp for _, timestamp in derive_alarms(report, mr_id)]


# --- serialization ---

def _estimate_to_dict(estimate: UncertaintyEstimate | None) -> dict | None:
    if estimate is None:
        return None
    return {"value": estimate.value, "sample_count": estimate.sample_count}


def _estimate_from_dict(data: dict | None) -> UncertaintyEstimate | None:
    if data is None:
        return None
    return UncertaintyEstimate(data["value"], data["sample_count"])


def _record_to_dict(record: FrameRecord) -> dict:
    relation = None
    if record.relation is not None:
        relation = {
            "mr_id": record.relation.mr_id,
            "frame_id": record.relation.frame_id,
            "source_value": record.relation.source_value,
            "twin_value": record.relation.twin_value,
            "distance": record.relation.distance,
            "epsilon": record.relation.epsilon,
            "uncertainty_gated": record.relation.uncertainty_gated,
            "passed": record.relation.passed,
        }
    twin = None
    if record.twin is not None:
        twin = {
            "attempts": record.twin.attempts,
            "similarity": record.twin.similarity,
            "compliant": record.twin.compliant,
            "violated": list(record.twin.violated),
        }
    return {
        "frame_id": record.frame_id,
        "timestamp": record.timestamp,
        "mr_id": record.mr_id,
        "relation": relation,
        "temporal_ok": record.temporal_ok,
        "source_uncertainty": _estimate_to_dict(record.source_uncertainty),
        "twin_uncertainty": _estimate_to_dict(record.twin_uncertainty),
        "twin": twin,
        "alarm": record.alarm,
        "unevaluable": record.unevaluable,
        "reason": record.reason,
        "sut_clamped": record.sut_clamped,
    }


def _record_from_dict(data: dict) -> FrameRecord:
    relation = None
    if data["relation"] is not None:
        relation = RelationOutcome(**data["relation"])
    twin = None
    if data["twin"] is not None:
        twin = TwinMeta(
            attempts=data["twin"]["attempts"],
            similarity=data["twin"]["similarity"],
            compliant=data["twin"]["compliant"],
            violated=tuple(data["twin"]["violated"]),
        )
    return FrameRecord(
        frame_id=data["frame_id"],
        timestamp=data["timestamp"],
        mr_id=data["mr_id"],
        relation=relation,
        temporal_ok=data["temporal_ok"],
        source_uncertainty=_estimate_from_dict(data["source_uncertainty"]),
        twin_uncertainty=_estimate_from_dict(data["twin_uncertainty"]),
        twin=twin,
        alarm=data["alarm"],
        unevaluable=data["unevaluable"],
        reason=data["reason"],
        sut_clamped=data["sut_clamped"],
    )


def write_report(report: ValidationReport, path: str | Path) -> Path:
    """Two-line document: a header line carrying run identity, then the
    canonical report body. Reruns with identical inputs differ only in the
    header line."""
    path = Path(path)
    header = canonical_dumps({"run_id": report.run_id, "generated_at": report.generated_at})
    body = canonical_dumps({
        "config": report.config,
        "totals": dict(report.totals),
        "records": [_record_to_dict(r) for r in report.records],
    })
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(header + "\n" + body + "\n")
    except OSError as err:
        raise IoFailure(f"cannot write {path}: {err}") from err
    return path


def read_report(path: str | Path) -> ValidationReport:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as err:
        raise IoFailure(f"cannot read {path}: {err}") from err
    if len(lines) < 2:
        raise ConfigInvalid(f"{path}: expected a header line and a body line")
    try:
        header = json.loads(lines[0])
        body = json.loads(lines[1])
    except json.JSONDecodeError as err:
        raise ConfigInvalid(f"{path}: not a report document: {err}") from err
    return ValidationReport(
        run_id=header["run_id"],
        generated_at=header["generated_at"],
        config=body["config"],
        records=tuple(_record_from_dict(d) for d in body["records"]),
        totals=body["totals"],
    )


def load_frames(sequence_dir: str | Path) -> list[Frame]:
    """Read a simulated sequence directory into pipeline frames."""
    sequence_dir = Path(sequence_dir)
    meta = sequence_dir / "metadata.csv"
    try:
        with meta.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise IoFailure(f"cannot read {meta}: {err}") from err
    if not rows or rows[0][:3] != ["frame_id", "timestamp_s", "weather"]:
        raise ConfigInvalid(f"{meta}: unexpected header {rows[0] if rows else '(empty)'}")
    frames: list[Frame] = []
    for row in rows[1:]:
        if not row:
            continue
        frame_id, timestamp_s, weather = row[0], row[1], row[2]
        png = sequence_dir / "frames" / f"{frame_id}.png"
        if not png.is_file():
            raise IoFailure(f"frame image missing: {png}")
        image = ImageBuffer.load(png, {"weather": weather})
        frames.append(Frame(frame_id, float(timestamp_s), image))
    return frames
