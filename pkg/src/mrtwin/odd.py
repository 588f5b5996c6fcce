"""Operational design domain: what a frame must satisfy to count as in-scope.

A domain is a bundle of named constraints over five concerns: infrastructure,
environment, operational limits, temporal conditions, and connectivity. Each
constraint names a measurer; measurers that need pixels compute a scalar from
the frame, the rest check declared metadata tags. ``within_domain`` evaluates
everything and reports the per-constraint measurements so a rejected frame is
explainable, not just rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import UnsupportedConstraint
from .image import ImageBuffer


@dataclass(frozen=True)
class Constraint:
    """One verifiable condition, e.g. mean luminance within [0.3, 0.7].

    ``lo``/``hi`` bound scalar measurers (either side may be None for
    one-sided bounds); ``tag_key``/``allowed`` configure tag measurers.
    """

    id: str
    measurer: str
    lo: float | None = None
    hi: float | None = None
    tag_key: str | None = None
    allowed: frozenset[str] = frozenset()


@dataclass(frozen=True)
class EnvConditions:
    """Environmental envelope: weather set, lighting band, visibility floor.

    ``temperature`` is carried for provenance but is not verifiable from a
    camera frame, so it never produces a constraint.
    """

    lighting: tuple[float, float] = (0.05, 0.95)
    visibility: float = 0.05
    weather: frozenset[str] | None = frozenset({"clear", "rain", "snow", "fog"})
    temperature: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        lo, hi = self.lighting
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"lighting band must be ordered within [0,1], got {self.lighting}")
        if not (0.0 <= self.visibility <= 1.0):
            raise ValueError(f"visibility floor must be in [0,1], got {self.visibility}")

    def constraints(self) -> tuple[Constraint, ...]:
        out = [
            Constraint(id="env.lighting", measurer="mean_luminance", lo=self.lighting[0], hi=self.lighting[1]),
            Constraint(id="env.visibility", measurer="michelson_contrast", lo=self.visibility),
        ]
        if self.weather is not None:
            out.append(Constraint(id="env.weather", measurer="tag_member", tag_key="weather", allowed=self.weather))
        return tuple(out)


@dataclass(frozen=True)
class OddSpec:
    """Domain definition. The environment owns at least one constraint by
    construction; the remaining groups default to unconstrained."""

    environment: EnvConditions = field(default_factory=EnvConditions)
    infrastructure: tuple[Constraint, ...] = ()
    limits: tuple[Constraint, ...] = ()
    temporal: tuple[Constraint, ...] = ()
    connectivity: tuple[Constraint, ...] = ()

    def constraints(self) -> tuple[Constraint, ...]:
        return (
            self.environment.constraints()
            + self.infrastructure
            + self.limits
            + self.temporal
            + self.connectivity
        )


@dataclass(frozen=True)
class ComplianceResult:
    compliant: bool
    violated: tuple[str, ...]
    measurements: Mapping[str, float]


Measurer = Callable[[ImageBuffer, Constraint], float]

_MEASURERS: dict[str, Measurer] = {}


def register_measurer(name: str, fn: Measurer) -> None:
    """Expose a project-specific measurement to constraint evaluation."""
    _MEASURERS[name] = fn


def _mean_luminance(x: ImageBuffer, _: Constraint) -> float:
    return float(x.luminance().mean()) / 255.0


def _michelson_contrast(x: ImageBuffer, _: Constraint) -> float:
    luma = x.luminance()
    hi = float(luma.max())
    lo = float(luma.min())
    if hi + lo == 0.0:
        return 0.0
    return (hi - lo) / (hi + lo)


def _tag_member(x: ImageBuffer, c: Constraint) -> float:
    # 1.0 for a declared tag inside the allowed set, 0.0 otherwise; a missing
    # tag counts as a violation rather than a free pass.
    if c.tag_key is None:
        return 0.0
    return 1.0 if x.tags.get(c.tag_key) in c.allowed else 0.0


register_measurer("mean_luminance", _mean_luminance)
register_measurer("michelson_contrast", _michelson_contrast)
register_measurer("tag_member", _tag_member)


def _evaluate(x: ImageBuffer, c: Constraint) -> tuple[bool, float]:
    try:
        fn = _MEASURERS[c.measurer]
    except KeyError:
        raise UnsupportedConstraint(f"{c.id}: no measurer named {c.measurer!r}") from None
    measured = fn(x, c)
    if c.measurer == "tag_member":
        return measured == 1.0, measured
    ok = True
    if c.lo is not None and measured < c.lo:
        ok = False
    if c.hi is not None and measured > c.hi:
        ok = False
    return ok, measured


def verify_constraint(x: ImageBuffer, c: Constraint) -> bool:
    """True when the frame satisfies the single constraint."""
    ok, _ = _evaluate(x, c)
    return ok


def within_domain(x: ImageBuffer, spec: OddSpec) -> ComplianceResult:
    """Evaluate every constraint; compliant only if none is violated."""
    violated: list[str] = []
    measurements: dict[str, float] = {}
    for c in spec.constraints():
        ok, measured = _evaluate(x, c)
        measurements[c.id] = measured
        if not ok:
            violated.append(c.id)
    return ComplianceResult(not violated, tuple(violated), measurements)
