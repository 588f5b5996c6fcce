import sys

import numpy as np
import pytest

from mrtwin import genproto, simulator
from mrtwin.errors import SutCrashed
from mrtwin.image import ImageBuffer
from mrtwin.sut import SutHandle, stub_steering

ECHO_SUT = [sys.executable, "-m", "mrtwin.fixtures.echo_sut"]


def road_frame(bright_cols, width=128, height=128):
    """Dark frame with full-height bright columns in the lower half."""
    arr = np.zeros((height, width, 3), dtype=np.uint8)
    for col in bright_cols:
        arr[height // 2:, col, :] = 255
    return ImageBuffer.from_array(arr)


def test_centered_symmetric_frame_steers_zero():
    # columns symmetric around the centre of a 128-wide frame: cx = 63.5/127 = 0.5
    frame = road_frame([53, 74])
    assert stub_steering(frame) == pytest.approx(0.0)


def test_right_shifted_lane_steers_right():
    assert stub_steering(road_frame([100, 110])) > 0.0


def test_leftmost_column_saturates():
    assert stub_steering(road_frame([0])) == -1.0


def test_no_bright_pixels_is_zero():
    assert stub_steering(ImageBuffer.filled(128, 128, 40)) == 0.0


def test_upper_half_brightness_ignored():
    arr = np.zeros((128, 128, 3), dtype=np.uint8)
    arr[: 64, 120, :] = 255  # sky glare, not lane paint
    assert stub_steering(ImageBuffer.from_array(arr)) == 0.0


def test_centroid_closed_form():
    # single column c: steering = 2*(c/(w-1) - 0.5)
    frame = road_frame([95], width=128)
    assert stub_steering(frame) == pytest.approx(2 * (95 / 127 - 0.5))


def test_simulator_frame_matches_true_centre():
    script = simulator.ScenarioScript(
        length_s=1.0, frame_rate=10, seed=1,
        segments=(simulator.TrackSegment(duration_s=1.0, curvature=0.05),),
    )
    for index in range(script.frame_count):
        frame = simulator.render_frame(script, index)
        cx = simulator.lane_centre(script, script.timestamp(index))
        want = max(-1.0, min(1.0, 2.0 * (cx - 0.5)))
        assert stub_steering(frame) == pytest.approx(want, abs=0.02)


def test_stub_handle_wraps_stub_steering():
    handle = SutHandle.stub()
    frame = road_frame([100, 110])
    p = handle.predict(frame, "f7")
    assert p.frame_id == "f7"
    assert p.steering == pytest.approx(stub_steering(frame))
    assert not p.clamped
    handle.close()


def test_external_prediction_passthrough(tmp_path):
    handle = SutHandle.external(genproto.open_sut(ECHO_SUT + ["--steering", "0.25"]))
    try:
        p = handle.predict(ImageBuffer.filled(64, 64, 10), "f0")
        assert p.steering == 0.25
        assert not p.clamped
    finally:
        handle.close()


def test_external_out_of_range_is_clamped_and_flagged():
    handle = SutHandle.external(genproto.open_sut(ECHO_SUT + ["--mode", "out-of-range"]))
    try:
        p = handle.predict(ImageBuffer.filled(64, 64, 10), "f0")
        assert p.steering == 1.0
        assert p.clamped
    finally:
        handle.close()


def test_external_crash_surfaces():
    handle = SutHandle.external(genproto.open_sut(ECHO_SUT + ["--mode", "crash"]))
    try:
        with pytest.raises(SutCrashed):
            handle.predict(ImageBuffer.filled(64, 64, 10), "f0")
    finally:
        handle.close()


def test_close_is_idempotent():
    handle = SutHandle.external(genproto.open_sut(ECHO_SUT))
    handle.close()
    handle.close()
