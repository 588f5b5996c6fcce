"""Metamorphic relation registry and per-frame relation checking.

A relation pairs a transformation recipe with an expectation about how the
SUT's output may move under it. Three relations are executable on the builtin
backend; the rest are declarative recipes that require a generative backend
advertising the matching capability. Ids follow the mrN scheme and iteration
is id-ordered with numeric suffixes compared numerically, so mr10 follows mr8
rather than mr1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from .errors import DuplicateId, InvalidThresholds
from .sut import Prediction
from .transforms import (
    MR1_BACKGROUND,
    MR2_SNOW,
    MR3_LANE_NARROW,
    EnvDelta,
    GeomDelta,
    SemDelta,
    TransformationSpec,
)

PATH = "path"
DETECTION = "detection"

DEFAULT_EPSILON_P = 0.05
DEFAULT_EPSILON_D = 0.05
DEFAULT_THETA_U = 0.01


@dataclass(frozen=True)
class MrDefinition:
    """One metamorphic relation: transform template, validator kind, and the
    thresholds the validator compares against."""

    id: str
    name: str
    transform: TransformationSpec
    validator: str = PATH
    epsilon_p: float = DEFAULT_EPSILON_P
    epsilon_d: float = DEFAULT_EPSILON_D
    theta_u: float = DEFAULT_THETA_U
    executable: bool = False
    description: str = ""

    def __post_init__(self) -> None:
        if self.validator not in (PATH, DETECTION):
            raise ValueError(f"unknown validator kind {self.validator!r}")
        if self.epsilon_p <= 0.0 or self.epsilon_d <= 0.0 or self.theta_u <= 0.0:
            raise InvalidThresholds(
                f"{self.id}: thresholds must be positive "
                f"(epsilon_p={self.epsilon_p}, epsilon_d={self.epsilon_d}, theta_u={self.theta_u})"
            )

    @property
    def epsilon(self) -> float:
        return self.epsilon_p if self.validator == PATH else self.epsilon_d


@dataclass(frozen=True)
class RelationOutcome:
    mr_id: str
    frame_id: str
    source_value: float
    twin_value: float
    distance: float
    epsilon: float
    uncertainty_gated: bool
    passed: bool


def id_sort_key(mr_id: str) -> tuple:
    # numeric-aware ordering: mr2 < mr10
    return tuple(int(part) if part.isdigit() else part for part in re.split(r"(\d+)", mr_id))


class MrRegistry:
    """Id-keyed collection of relation definitions."""

    def __init__(self) -> None:
        self._defs: dict[str, MrDefinition] = {}

    def register(self, defn: MrDefinition) -> None:
        if defn.id in self._defs:
            raise DuplicateId(f"relation {defn.id!r} already registered")
        self._defs[defn.id] = defn

    def get(self, mr_id: str) -> MrDefinition:
        return self._defs[mr_id]

    def __contains__(self, mr_id: str) -> bool:
        return mr_id in self._defs

    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._defs, key=id_sort_key))

    def __iter__(self) -> Iterator[MrDefinition]:
        for mr_id in self.ids():
            yield self._defs[mr_id]

    def __len__(self) -> int:
        return len(self._defs)


def builtin_definitions() -> MrRegistry:
    """The stock relations: three executable ones and the declarative set
    (mr4..mr8 and mr10; there is no mr9)."""
    registry = MrRegistry()
    registry.register(MrDefinition(
        id="mr1",
        name="Background variation",
        transform=TransformationSpec(id=MR1_BACKGROUND, semantic=SemDelta(amplitude=0.05)),
        executable=True,
        description="Smooth background noise off the lane band must not move the path.",
    ))
    registry.register(MrDefinition(
        id="mr2",
        name="Snow overlay",
        transform=TransformationSpec(id=MR2_SNOW, environmental=EnvDelta(weather="snow", density=0.1)),
        validator=DETECTION,
        executable=True,
        description="Speckled snow must not change what the system detects.",
    ))
    registry.register(MrDefinition(
        id="mr3",
        name="Lane narrowing",
        transform=TransformationSpec(id=MR3_LANE_NARROW, geometric=GeomDelta(lane_narrow=0.8)),
        executable=True,
        description="A mildly narrowed lane must not move the path.",
    ))
    registry.register(MrDefinition(
        id="mr4",
        name="Agent substitution",
        transform=TransformationSpec(
            id="mr4.agent_substitution",
            semantic=SemDelta(operation="substitute_agent", argument="new_type",
                              preserve=("position", "velocity", "size_class")),
        ),
        description="Swapping an agent for one of the same size class keeps the path.",
    ))
    registry.register(MrDefinition(
        id="mr5",
        name="Time-of-day consistency",
        transform=TransformationSpec(
            id="mr5.time_of_day",
            semantic=SemDelta(operation="adjust_lighting", argument="target_time",
                              preserve=("geometry", "objects", "lanes")),
        ),
        description="Relighting the scene for another hour keeps the path.",
    ))
    registry.register(MrDefinition(
        id="mr6",
        name="Traffic control equivalence",
        transform=TransformationSpec(
            id="mr6.traffic_control",
            semantic=SemDelta(operation="replace_signal", argument="equivalent_control",
                              preserve=("intersection_geometry",)),
        ),
        description="Equivalent control devices elicit the same decision.",
    ))
    registry.register(MrDefinition(
        id="mr7",
        name="Emergency vehicle priority",
        transform=TransformationSpec(
            id="mr7.emergency_vehicle",
            semantic=SemDelta(operation="replace_emergency", argument="new_type",
                              preserve=("priority", "position", "signals")),
        ),
        validator=DETECTION,
        description="Any emergency vehicle with right of way gets the same yield.",
    ))
    registry.register(MrDefinition(
        id="mr8",
        name="Construction zone adaptation",
        transform=TransformationSpec(
            id="mr8.construction_zone",
            semantic=SemDelta(operation="add_construction", argument="cone_pattern",
                              preserve=("intended_path", "lane_width")),
        ),
        description="Cone layouts that leave the lane intact keep the path.",
    ))
    registry.register(MrDefinition(
        id="mr10",
        name="Obstacle substitution",
        transform=TransformationSpec(
            id="mr10.obstacle_substitution",
            semantic=SemDelta(operation="replace_obstacle", argument="equivalent_obstacle",
                              preserve=("size", "position", "blockage")),
        ),
        validator=DETECTION,
        description="Equally blocking obstacles elicit the same avoidance.",
    ))
    return registry


def validate_relation(
    defn: MrDefinition,
    source: Prediction,
    twin: Prediction,
    twin_uncertainty: float,
) -> RelationOutcome:
    """Check one source/twin prediction pair against a relation.

    The pair passes when the steering distance stays within the validator's
    epsilon and the supplied uncertainty does not exceed theta_u. Both
    predictions must describe the same frame.
    """
    if source.frame_id != twin.frame_id:
        raise ValueError(
            f"prediction pair crosses frames: {source.frame_id!r} vs {twin.frame_id!r}"
        )
    distance = abs(source.steering - twin.steering)
    gated = twin_uncertainty > defn.theta_u
    return RelationOutcome(
        mr_id=defn.id,
        frame_id=source.frame_id,
        source_value=source.steering,
        twin_value=twin.steering,
        distance=distance,
        epsilon=defn.epsilon,
        uncertainty_gated=gated,
        passed=distance <= defn.epsilon and not gated,
    )
