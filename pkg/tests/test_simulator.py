"""Scenario scripts, rendered geometry, and sequence output."""

import hashlib
import json

import numpy as np
import pytest

from mrtwin.errors import ConfigInvalid, IoFailure, OutOfRange
from mrtwin.simulator import (
    CX_MAX,
    FRAME_HEIGHT,
    FRAME_WIDTH,
    Hazard,
    ScenarioScript,
    TrackSegment,
    crash_times,
    generate_sequence,
    ground_truth,
    inject_hazard,
    lane_centre,
    lane_span_px,
    load_manifest,
    render_frame,
    render_mask,
    script_from_dict,
    script_id,
    script_to_dict,
    weather_at,
)
from mrtwin.transforms import GeomDelta, TransformationSpec, apply_builtin


def test_straight_road_stays_centred(straight_script):
    for index in range(straight_script.frame_count):
        assert lane_centre(straight_script, straight_script.timestamp(index)) == 0.5
    assert crash_times(straight_script) == ()


def test_frame_grid():
    script = ScenarioScript(length_s=5.0, frame_rate=10)
    assert script.frame_count == 50
    assert script.timestamp(3) == pytest.approx(0.3)


def test_curvature_drifts_centre():
    script = ScenarioScript(
        length_s=10.0, segments=(TrackSegment(10.0, curvature=0.02),))
    assert lane_centre(script, 0.0) == pytest.approx(0.5)
    assert lane_centre(script, 5.0) == pytest.approx(0.6)
    assert lane_centre(script, 10.0) == pytest.approx(0.7)


def test_hazard_shove_and_recovery():
    script = ScenarioScript(length_s=30.0, hazards=(Hazard(10.0, magnitude=0.4),))
    assert lane_centre(script, 9.9) == pytest.approx(0.5)
    assert lane_centre(script, 10.0) == pytest.approx(0.9)
    assert lane_centre(script, 13.9) == pytest.approx(0.9)
    # recovery_s defaults to 4.0, shove window is half-open
    assert lane_centre(script, 14.0) == pytest.approx(0.5)


def test_centre_clamped_on_screen():
    script = ScenarioScript(
        length_s=30.0,
        segments=(TrackSegment(30.0, curvature=0.02),),
        hazards=(Hazard(10.0, magnitude=0.4),),
    )
    # base 0.7 + shove 0.4 would be 1.1
    assert lane_centre(script, 10.0) == CX_MAX


def test_crash_lags_hazard_onset():
    script = ScenarioScript(length_s=30.0, hazards=(Hazard(10.0, magnitude=0.4),))
    assert crash_times(script) == (12.0,)


def test_zero_lag_crashes_at_onset():
    script = ScenarioScript(
        length_s=30.0, crash_lag_s=0.0, hazards=(Hazard(10.0, magnitude=0.4),))
    assert crash_times(script) == (10.0,)


def test_crash_snapped_to_frame_grid():
    script = ScenarioScript(length_s=30.0, hazards=(Hazard(10.03, magnitude=0.4),))
    assert crash_times(script) == (12.0,)


def test_crash_capped_at_final_frame():
    script = ScenarioScript(length_s=20.0, hazards=(Hazard(19.5, magnitude=0.4),))
    assert crash_times(script) == (script.timestamp(script.frame_count - 1),)


def test_mild_hazard_never_crashes():
    script = ScenarioScript(length_s=30.0, hazards=(Hazard(10.0, magnitude=0.2),))
    assert crash_times(script) == ()
    assert lane_centre(script, 10.0) == pytest.approx(0.7)


def test_coinciding_crashes_deduplicated():
    script = ScenarioScript(
        length_s=30.0,
        hazards=(Hazard(10.0, magnitude=0.4), Hazard(10.0, magnitude=0.35)),
    )
    assert crash_times(script) == (12.0,)


def test_ground_truth_carries_crashes(hazard_script):
    gt = ground_truth(hazard_script)
    assert gt.crash_times == (14.0,)
    assert gt.span == (0.0, 30.0)
    assert gt.frame_rate == 10.0


# --- validation ---

def test_hazard_outside_script_rejected():
    with pytest.raises(ValueError):
        ScenarioScript(length_s=10.0, hazards=(Hazard(10.0, magnitude=0.4),))


def test_hazard_magnitude_bounded():
    with pytest.raises(ValueError):
        Hazard(1.0, magnitude=0.5)


def test_unknown_hazard_kind_rejected():
    with pytest.raises(ValueError):
        Hazard(1.0, kind="meteor", magnitude=0.1)


def test_bad_script_parameters_rejected():
    with pytest.raises(ValueError):
        ScenarioScript(length_s=0.0)
    with pytest.raises(ValueError):
        ScenarioScript(length_s=5.0, frame_rate=0)
    with pytest.raises(ValueError):
        TrackSegment(0.0)


# --- injection ---

def test_inject_hazard_appends(straight_script):
    shoved = inject_hazard(straight_script, Hazard(2.0, magnitude=0.4))
    assert len(shoved.hazards) == len(straight_script.hazards) + 1
    assert shoved.hazards[-1].time_s == 2.0
    assert straight_script.hazards == ()
    assert crash_times(shoved) == (4.0,)


def test_inject_hazard_bounds(straight_script):
    with pytest.raises(OutOfRange):
        inject_hazard(straight_script, Hazard(straight_script.length_s, magnitude=0.1))
    with pytest.raises(OutOfRange):
        inject_hazard(straight_script, Hazard(-0.1))


# --- rendering ---

def test_frame_shape_and_weather_tag(straight_script):
    frame = render_frame(straight_script, 0)
    assert (frame.height, frame.width) == (FRAME_HEIGHT, FRAME_WIDTH)
    assert frame.tags["weather"] == "clear"


def test_weather_follows_segments():
    script = ScenarioScript(
        length_s=4.0,
        segments=(TrackSegment(2.0, weather="clear"), TrackSegment(2.0, weather="fog")),
    )
    assert weather_at(script, 0.5) == "clear"
    assert weather_at(script, 2.5) == "fog"
    assert render_frame(script, 25).tags["weather"] == "fog"


def test_lane_lines_only_on_road_half(straight_script):
    luma = render_frame(straight_script, 0).luminance()
    assert float(luma[: FRAME_HEIGHT // 2].max()) < 200.0
    assert float(luma[FRAME_HEIGHT // 2:].max()) == 255.0


def test_mask_matches_frame(straight_script):
    luma = render_frame(straight_script, 7).luminance()[FRAME_HEIGHT // 2:]
    mask = render_mask(straight_script, 7)[FRAME_HEIGHT // 2:]
    np.testing.assert_array_equal(luma > 200.0, mask == 255)


def test_lane_span_oracle(straight_script):
    frame = render_frame(straight_script, 0)
    # anchors at round(0.41 * 255) and round(0.59 * 255), lines 5 px wide
    assert lane_span_px(frame) == float((150 + 2) - (105 - 2))


def test_lane_span_none_without_lines():
    from mrtwin.image import ImageBuffer

    assert lane_span_px(ImageBuffer.filled(64, 64, 10)) is None


def test_squeeze_narrows_lane_span(straight_script):
    frame = render_frame(straight_script, 0)
    src_span = lane_span_px(frame)
    spec = TransformationSpec("mr3", seed=1, geometric=GeomDelta(0.8))
    twin = apply_builtin(frame, spec)
    assert abs(lane_span_px(twin) - 0.8 * src_span) <= 1.0


# --- identity and serialization ---

def test_script_round_trip(hazard_script):
    assert script_from_dict(script_to_dict(hazard_script)) == hazard_script


def test_script_from_dict_fail_closed():
    with pytest.raises(ConfigInvalid):
        script_from_dict({"frame_rate": 10})  # length_s missing
    with pytest.raises(ConfigInvalid):
        script_from_dict({"length_s": "plenty"})


def test_script_id_tracks_content(straight_script):
    base = script_id(straight_script)
    assert base == script_id(straight_script)
    assert base.startswith("seq-3-")
    shoved = inject_hazard(straight_script, Hazard(1.0, magnitude=0.1))
    assert script_id(shoved) != base


# --- sequence output ---

def digest_tree(root):
    acc = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            acc.update(path.relative_to(root).as_posix().encode())
            acc.update(path.read_bytes())
    return acc.hexdigest()


def test_sequence_layout(sequence_dir):
    manifest = load_manifest(sequence_dir)
    assert manifest["frames"] == 40
    assert manifest["span"] == [0.0, 4.0]
    assert (sequence_dir / "frames" / "frame_000000.png").exists()
    assert (sequence_dir / "masks" / "frame_000039.png").exists()

    header = (sequence_dir / "metadata.csv").read_text().splitlines()[0]
    assert header == "frame_id,timestamp_s,weather,cx_true"
    gt_lines = (sequence_dir / "ground_truth.csv").read_text().splitlines()
    assert gt_lines[0] == "sequence_id,crash_time_s"


def test_sequence_rerun_byte_identical(tmp_path):
    script = ScenarioScript(length_s=1.0, frame_rate=5, seed=9)
    a = generate_sequence(script, tmp_path / "a")
    b = generate_sequence(script, tmp_path / "b")
    assert digest_tree(a) == digest_tree(b)


def test_ground_truth_file_lists_crashes(tmp_path):
    script = ScenarioScript(
        length_s=6.0, frame_rate=5, hazards=(Hazard(2.0, magnitude=0.4),))
    out = generate_sequence(script, tmp_path / "seq")
    lines = (out / "ground_truth.csv").read_text().splitlines()
    assert lines[1] == f"{script_id(script)},4.000"


def test_manifest_script_echo_round_trips(sequence_dir):
    manifest = load_manifest(sequence_dir)
    script = script_from_dict(manifest["script"])
    assert script.frame_count == manifest["frames"]
    assert script_id(script) == manifest["sequence_id"]


def test_load_manifest_errors(tmp_path):
    with pytest.raises(IoFailure):
        load_manifest(tmp_path / "absent")
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "sequence.json").write_text("{nope")
    with pytest.raises(ConfigInvalid):
        load_manifest(bad)


def test_generate_sequence_unwritable(tmp_path):
    target = tmp_path / "blocked"
    target.write_text("file, not a directory")
    with pytest.raises(IoFailure):
        generate_sequence(ScenarioScript(length_s=1.0, frame_rate=5), target / "seq")
