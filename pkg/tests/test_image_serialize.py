import json

import numpy as np
import pytest

from mrtwin.image import ImageBuffer, png_size
from mrtwin.serialize import canonical_float, dumps


def test_buffer_length_must_match_dimensions():
    with pytest.raises(ValueError):
        ImageBuffer(4, 4, b"\x00" * 10, {})


def test_from_array_promotes_grayscale():
    arr = np.arange(64 * 64, dtype=np.uint8).reshape(64, 64)
    img = ImageBuffer.from_array(arr)
    view = img.to_array()
    assert view.shape == (64, 64, 3)
    assert (view[:, :, 0] == view[:, :, 2]).all()


def test_to_array_is_read_only():
    img = ImageBuffer.filled(64, 64, 5)
    with pytest.raises(ValueError):
        img.to_array()[0, 0, 0] = 1


def test_luminance_rec601_weights():
    img = ImageBuffer.from_array(np.full((64, 64, 3), [100, 50, 200], dtype=np.uint8))
    want = 0.299 * 100 + 0.587 * 50 + 0.114 * 200
    assert img.luminance()[0, 0] == pytest.approx(want)


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    img = ImageBuffer.from_array(rng.integers(0, 256, (70, 90, 3), dtype=np.uint8))
    path = tmp_path / "nested" / "img.png"
    img.save(path)
    assert png_size(path) == (70, 90)
    again = ImageBuffer.load(path)
    assert again.data == img.data


def test_with_tags_replaces_and_leaves_original():
    img = ImageBuffer.filled(64, 64, 0, {"weather": "clear"})
    tagged = img.with_tags({"weather": "snow"})
    assert tagged.tags == {"weather": "snow"}
    assert img.tags["weather"] == "clear"
    assert tagged.data is img.data


# --- canonical serialization ---

def test_floats_keep_six_decimals():
    assert dumps({"x": 0.1}) == '{"x":0.100000}'
    assert dumps([1.0, 2.5]) == "[1.000000,2.500000]"


def test_key_order_is_insertion_order():
    assert dumps({"b": 1, "a": 2}) == '{"b":1,"a":2}'


def test_canonical_float_is_idempotent():
    for x in (0.1, 1 / 3, 123.4567894, -0.0000004):
        once = canonical_float(x)
        assert canonical_float(once) == once


def test_dumps_output_is_valid_json():
    doc = {"a": [1, 2.5, None, True, "s"], "b": {"c": -0.25}}
    assert json.loads(dumps(doc)) == {"a": [1, 2.5, None, True, "s"], "b": {"c": -0.25}}


def test_dumps_rejects_unknown_types():
    with pytest.raises(TypeError):
        dumps({"x": object()})
