"""Error taxonomy shared across the harness.

Process-facing failures (launch, timeout, malformed traffic) are kept separate
from domain failures (compliance, retry exhaustion) so the pipeline can decide
which ones abort a run and which ones merely mark a frame unevaluable.
"""

from __future__ import annotations


class MrTwinError(Exception):
    """Base class for every error raised by this package."""


class ConfigInvalid(MrTwinError):
    """Configuration file is missing, has unknown keys, or fails validation."""


class IoFailure(MrTwinError):
    """A read or write against the filesystem failed."""


# --- operational design domain ---

class UnsupportedConstraint(MrTwinError):
    """Constraint references a measurer nobody registered."""


# --- transform engine ---

class BadSpec(MrTwinError):
    """Transformation spec is structurally unusable for the builtin backend."""


class DimensionMismatch(MrTwinError):
    """Two images that must share a shape do not."""


class SourceOutOfDomain(MrTwinError):
    """Source frame already violates the domain, so no twin can be compliant."""

    def __init__(self, violated: tuple[str, ...]):
        super().__init__(f"source frame violates: {', '.join(violated)}")
        self.violated = violated


class ExhaustedRetries(MrTwinError):
    """Every reseeded generation attempt produced a non-compliant twin."""

    def __init__(self, attempts: int, violated: tuple[str, ...] = (), similarity: float | None = None):
        detail = f"no compliant twin after {attempts} attempts"
        if violated:
            detail += f" (last violations: {', '.join(violated)})"
        if similarity is not None:
            detail += f" (last similarity: {similarity:.4f})"
        super().__init__(detail)
        self.attempts = attempts
        self.violated = violated
        self.similarity = similarity


class GeneratorUnavailable(MrTwinError):
    """External generator process is gone or unreachable."""


# --- wire protocol ---

class LaunchFailure(MrTwinError):
    """Child process could not be started or died before the handshake."""


class HandshakeTimeout(MrTwinError):
    """No hello arrived within the handshake deadline."""


class ProtocolVersionMismatch(MrTwinError):
    """Child speaks a protocol version this harness does not."""


class UnsupportedTransform(MrTwinError):
    """Requested transform id is outside the advertised capabilities."""


class GeneratorTimeout(MrTwinError):
    """Generator accepted a request but never answered in time."""


class MalformedResponse(MrTwinError):
    """Child sent something that is not a well-formed protocol message."""


class GeneratorReportedError(MrTwinError):
    """Generator answered with status=error."""


# --- system under test ---

class SutTimeout(MrTwinError):
    """Prediction request timed out."""


class SutCrashed(MrTwinError):
    """SUT process exited while a prediction was expected."""


# --- metamorphic relation registry ---

class DuplicateId(MrTwinError):
    """Two relation definitions claim the same id."""


class InvalidThresholds(MrTwinError):
    """A relation threshold is zero, negative, or otherwise meaningless."""


# --- temporal analysis ---

class EmptyWindow(MrTwinError):
    """Operation needs at least one sample in the window."""


class SizeMismatch(MrTwinError):
    """Paired windows were configured with different nominal sizes."""


# --- validation pipeline ---

class NoFrames(MrTwinError):
    """Sequence contains no frames."""


# --- scenario simulation ---

class OutOfRange(MrTwinError):
    """Hazard time falls outside the script's duration."""
