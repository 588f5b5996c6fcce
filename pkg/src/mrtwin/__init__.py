"""Metamorphic twin validation for camera-based lane keeping.

The package turns a recorded (or simulated) drive into a set of
source/twin frame pairs, runs the system under test on both, and checks
metamorphic relations plus temporal smoothing on the prediction streams.
"""

from .errors import (
    ConfigInvalid,
    ExhaustedRetries,
    GeneratorReportedError,
    GeneratorTimeout,
    GeneratorUnavailable,
    MalformedResponse,
    MrTwinError,
    SourceOutOfDomain,
    SutCrashed,
    SutTimeout,
)
from .evaluation import (
    Confusion,
    GroundTruth,
    MetricSummary,
    confusion,
    label_windows,
    metrics,
    time_to_crash_histogram,
)
from .image import ImageBuffer
from .odd import ComplianceResult, EnvConditions, OddSpec, within_domain
from .pipeline import (
    Frame,
    FrameRecord,
    ValidationReport,
    load_frames,
    read_report,
    run_sequence,
    write_report,
)
from .relations import (
    MrDefinition,
    MrRegistry,
    RelationOutcome,
    builtin_definitions,
    validate_relation,
)
from .sut import Prediction, SutHandle
from .temporal import SlidingWindow, UncertaintyEstimate, estimate_uncertainty, smooth, validate_temporal
from .transforms import (
    RetryPolicy,
    TransformationSpec,
    TwinResult,
    apply_builtin,
    generate_compliant,
    identity_spec,
    image_similarity,
)

__version__ = "0.1.0"

__all__ = [
    "ComplianceResult",
    "ConfigInvalid",
    "Confusion",
    "EnvConditions",
    "ExhaustedRetries",
    "Frame",
    "FrameRecord",
    "GeneratorReportedError",
    "GeneratorTimeout",
    "GeneratorUnavailable",
    "GroundTruth",
    "ImageBuffer",
    "MalformedResponse",
    "MetricSummary",
    "MrDefinition",
    "MrRegistry",
    "MrTwinError",
    "OddSpec",
    "Prediction",
    "RelationOutcome",
    "RetryPolicy",
    "SlidingWindow",
    "SourceOutOfDomain",
    "SutCrashed",
    "SutHandle",
    "SutTimeout",
    "TransformationSpec",
    "TwinResult",
    "UncertaintyEstimate",
    "ValidationReport",
    "apply_builtin",
    "builtin_definitions",
    "confusion",
    "estimate_uncertainty",
    "generate_compliant",
    "identity_spec",
    "image_similarity",
    "label_windows",
    "load_frames",
    "metrics",
    "read_report",
    "run_sequence",
    "smooth",
    "time_to_crash_histogram",
    "validate_relation",
    "validate_temporal",
    "within_domain",
    "write_report",
]
