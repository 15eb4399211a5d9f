import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays
from hypothesis import strategies as st

from intgrad.errors import InputFormatError
from intgrad.imageio import (
    decode_pnm,
    encode_pgm,
    encode_ppm,
    heatmap_levels,
    load_input,
    read_boxes,
    read_feature_csv,
    save_heatmap,
    write_boxes,
    write_feature_csv,
)
from intgrad.models import BoundingBox


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_pgm_round_trip(gray):
    img = decode_pnm(encode_pgm(gray))
    assert img.shape == gray.shape + (1,)
    np.testing.assert_array_equal(np.rint(img[..., 0] * 255).astype(np.uint8), gray)


def test_ppm_round_trip():
    rgb = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3) * 7
    img = decode_pnm(encode_ppm(rgb))
    np.testing.assert_array_equal(np.rint(img * 255), rgb)


def test_header_comments_and_maxval():
    raw = b"P5\n# made by hand\n2 1\n# max\n15\n\x0f\x05"
    np.testing.assert_allclose(decode_pnm(raw)[..., 0], [[1.0, 5 / 15]])


@pytest.mark.parametrize(
    "raw",
    [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n2", b"P5\n2 x\n255\n\x00\x00", b"P5\n1 1\n65535\n\x00\x00"],
)
def test_bad_images(raw):
    with pytest.raises(InputFormatError):
        decode_pnm(raw)


def test_heatmap_scaling():
    levels = heatmap_levels(np.array([[0.0, 1.0], [2.0, 4.0]]))
    np.testing.assert_array_equal(levels, [[0, 64], [128, 255]])
    np.testing.assert_array_equal(heatmap_levels(np.zeros((2, 2))), 0)
    with pytest.raises(ValueError):
        heatmap_levels(np.array([-1.0]))


def test_vector_heatmap(tmp_path):
    save_heatmap(np.array([0.0, 2.0]), tmp_path / "h.pgm")
    assert (tmp_path / "h.pgm").read_bytes() == b"P5\n2 1\n255\n\x00\xff"


def test_feature_csv_forms(tmp_path):
    p = tmp_path / "a.csv"
    write_feature_csv(["u", "v"], [1.5, -2.0], p)
    assert read_feature_csv(p) == (["u", "v"], pytest.approx(np.array([1.5, -2.0])))
    p.write_text("a,b,c\n1,2,3\n")
    names, values = read_feature_csv(p)
    assert names == ["a", "b", "c"] and list(values) == [1.0, 2.0, 3.0]
    p.write_text("feature,value\nx,oops\n")
    with pytest.raises(InputFormatError):
        read_feature_csv(p)
    p.write_text("feature,value\nx,nan\n")
    with pytest.raises(InputFormatError):
        read_feature_csv(p)


def test_load_input_dispatch(tmp_path):
    (tmp_path / "i.pgm").write_bytes(encode_pgm(np.full((2, 2), 255, dtype=np.uint8)))
    names, img = load_input(tmp_path / "i.pgm")
    assert names is None and img.shape == (2, 2, 1) and img.max() == 1.0
    (tmp_path / "i.pbm").write_bytes(b"P4\n1 1\n\x00")
    with pytest.raises(InputFormatError):
        load_input(tmp_path / "i.pbm")


def test_boxes(tmp_path):
    boxes = [BoundingBox(0, 1, 3, 4), BoundingBox(2, 2, 5, 6)]
    write_boxes(boxes, tmp_path / "b.txt")
    assert read_boxes(tmp_path / "b.txt") == boxes
    (tmp_path / "bad.txt").write_text("1 2 3\n")
    with pytest.raises(InputFormatError):
        read_boxes(tmp_path / "bad.txt")
