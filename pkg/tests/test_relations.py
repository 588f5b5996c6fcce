"""Relation definitions, registry ordering, and the per-frame check."""

import pytest

from mrtwin.errors import DuplicateId, InvalidThresholds
from mrtwin.relations import (
    DETECTION,
    PATH,
    MrDefinition,
    MrRegistry,
    builtin_definitions,
    id_sort_key,
    validate_relation,
)
from mrtwin.sut import Prediction
from mrtwin.transforms import SemDelta, TransformationSpec


def pred(steering, frame_id="f1"):
    return Prediction(frame_id=frame_id, steering=steering, latency_ms=0.0)


def make_def(**kw):
    base = dict(
        id="mr1",
        name="test",
        transform=TransformationSpec(id="x", semantic=SemDelta(amplitude=0.1)),
    )
    base.update(kw)
    return MrDefinition(**base)


def test_registry_orders_numerically():
    reg = MrRegistry()
    for mr_id in ("mr10", "mr2", "mr1"):
        reg.register(make_def(id=mr_id))
    assert reg.ids() == ("mr1", "mr2", "mr10")


def test_duplicate_registration_rejected():
    reg = MrRegistry()
    reg.register(make_def())
    with pytest.raises(DuplicateId):
        reg.register(make_def())


def test_thresholds_must_be_positive():
    with pytest.raises(InvalidThresholds):
        make_def(epsilon_p=0.0)
    with pytest.raises(InvalidThresholds):
        make_def(theta_u=-0.1)


def test_builtin_set_contents():
    reg = builtin_definitions()
    assert reg.ids() == ("mr1", "mr2", "mr3", "mr4", "mr5", "mr6", "mr7", "mr8", "mr10")
    assert "mr9" not in reg
    executable = [d.id for d in reg if d.executable]
    assert executable == ["mr1", "mr2", "mr3"]


def test_builtin_mr2_is_snow_detection():
    mr2 = builtin_definitions().get("mr2")
    assert mr2.transform.environmental.weather == "snow"
    assert mr2.validator == DETECTION


def test_builtin_mr4_preserve_set():
    mr4 = builtin_definitions().get("mr4")
    assert mr4.transform.semantic.preserve == ("position", "velocity", "size_class")
    assert not mr4.executable


def test_epsilon_follows_validator_kind():
    d = make_def(validator=PATH, epsilon_p=0.05, epsilon_d=0.2)
    assert d.epsilon == 0.05
    d = make_def(validator=DETECTION, epsilon_p=0.05, epsilon_d=0.2)
    assert d.epsilon == 0.2


def test_identical_predictions_pass():
    outcome = validate_relation(make_def(), pred(0.10), pred(0.10), twin_uncertainty=0.0)
    assert outcome.distance == 0.0
    assert outcome.passed
    assert not outcome.uncertainty_gated


def test_distance_beyond_epsilon_fails():
    outcome = validate_relation(make_def(epsilon_p=0.05), pred(0.10), pred(0.30), 0.0)
    assert outcome.distance == pytest.approx(0.2)
    assert not outcome.passed


def test_uncertainty_gate_fires_independent_of_distance():
    d = make_def(theta_u=0.01)
    outcome = validate_relation(d, pred(0.10), pred(0.11), twin_uncertainty=0.02)
    assert outcome.uncertainty_gated
    assert not outcome.passed


def test_gate_boundary_is_strict():
    d = make_def(theta_u=0.01)
    assert not validate_relation(d, pred(0.1), pred(0.1), 0.01).uncertainty_gated
    assert validate_relation(d, pred(0.1), pred(0.1), 0.010001).uncertainty_gated


def test_cross_frame_pairs_rejected():
    with pytest.raises(ValueError):
        validate_relation(make_def(), pred(0.1, "f1"), pred(0.1, "f2"), 0.0)


def test_id_sort_key_natural_order():
    ids = sorted(["mr10", "mr9x", "mr2", "mr1"], key=id_sort_key)
    assert ids == ["mr1", "mr2", "mr9x", "mr10"]
