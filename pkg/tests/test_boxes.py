import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seadet.boxes import (
    BBoxAbs,
    BBoxNorm,
    coco_to_yolo_box,
    giou_norm,
    iou,
    yolo_to_coco_box,
)
from seadet.errors import DegenerateBoxError, InvalidImageGeometryError


class TestYoloToCoco:
    def test_hand_case(self):
        b = yolo_to_coco_box(BBoxNorm(0.5, 0.5, 0.25, 0.5), 640, 480)
        assert (b.x, b.y, b.w, b.h) == (240.0, 120.0, 160.0, 240.0)

    def test_full_image_box(self):
        b = yolo_to_coco_box(BBoxNorm(0.5, 0.5, 1.0, 1.0), 1024, 768)
        assert (b.x, b.y, b.w, b.h) == (0.0, 0.0, 1024.0, 768.0)

    def test_edge_clamp(self):
        # clamp formula by hand: left/top edges at -5 px clamp to 0,
        # right/bottom edges at 25 px stay; extent becomes 25
        b = yolo_to_coco_box(BBoxNorm(0.1, 0.1, 0.3, 0.3), 100, 100)
        assert (b.x, b.y, b.w, b.h) == (0.0, 0.0, 25.0, 25.0)

    def test_bad_image_dims(self):
        with pytest.raises(InvalidImageGeometryError):
            yolo_to_coco_box(BBoxNorm(0.5, 0.5, 0.1, 0.1), 0, 100)
        with pytest.raises(InvalidImageGeometryError):
            coco_to_yolo_box(BBoxAbs(0, 0, 10, 10), 100, -1)

    def test_degenerate_box(self):
        with pytest.raises(DegenerateBoxError):
            yolo_to_coco_box(BBoxNorm(0.5, 0.5, 0.0, 0.1), 100, 100)
        # fully outside the image: clamps to zero width
        with pytest.raises(DegenerateBoxError):
            yolo_to_coco_box(BBoxNorm(2.0, 0.5, 0.1, 0.1), 100, 100)


class TestCocoToYolo:
    def test_inverse_of_hand_case(self):
        n = coco_to_yolo_box(BBoxAbs(240, 120, 160, 240), 640, 480)
        assert (n.cx, n.cy, n.w, n.h) == (0.5, 0.5, 0.25, 0.5)

    def test_full_image(self):
        n = coco_to_yolo_box(BBoxAbs(0, 0, 320, 200), 320, 200)
        assert (n.cx, n.cy, n.w, n.h) == (0.5, 0.5, 1.0, 1.0)

    def test_degenerate(self):
        with pytest.raises(DegenerateBoxError):
            coco_to_yolo_box(BBoxAbs(0, 0, 0, 10), 100, 100)


def _random_inbounds_boxes(rng, n):
    w = rng.uniform(1e-3, 1.0, n)
    h = rng.uniform(1e-3, 1.0, n)
    cx = w / 2 + rng.uniform(0.0, 1.0, n) * (1.0 - w)
    cy = h / 2 + rng.uniform(0.0, 1.0, n) * (1.0 - h)
    return cx, cy, w, h


def test_round_trip_random_boxes():
    rng = np.random.default_rng(123)
    cx, cy, w, h = _random_inbounds_boxes(rng, 1000)
    widths = rng.integers(8, 4096, 1000)
    heights = rng.integers(8, 4096, 1000)
    worst = 0.0
    for i in range(1000):
        b = BBoxNorm(cx[i], cy[i], w[i], h[i])
        back = coco_to_yolo_box(yolo_to_coco_box(b, widths[i], heights[i]), widths[i], heights[i])
        worst = max(
            worst,
            abs(back.cx - b.cx),
            abs(back.cy - b.cy),
            abs(back.w - b.w),
            abs(back.h - b.h),
        )
    assert worst <= 1e-6


@settings(max_examples=200, deadline=None)
@given(
    w=st.floats(1e-3, 1.0),
    h=st.floats(1e-3, 1.0),
    fx=st.floats(0.0, 1.0),
    fy=st.floats(0.0, 1.0),
    width=st.integers(1, 8192),
    height=st.integers(1, 8192),
)
def test_round_trip_property(w, h, fx, fy, width, height):
    b = BBoxNorm(cx=w / 2 + fx * (1 - w), cy=h / 2 + fy * (1 - h), w=w, h=h)
    back = coco_to_yolo_box(yolo_to_coco_box(b, width, height), width, height)
    assert abs(back.cx - b.cx) <= 1e-6
    assert abs(back.cy - b.cy) <= 1e-6
    assert abs(back.w - b.w) <= 1e-6
    assert abs(back.h - b.h) <= 1e-6


def _pixel_grid_iou(a: BBoxAbs, b: BBoxAbs) -> float:
    """Counting oracle for integer-aligned boxes: tally unit cells."""
    cells_a = {
        (x, y)
        for x in range(int(a.x), int(a.x2))
        for y in range(int(a.y), int(a.y2))
    }
    cells_b = {
        (x, y)
        for x in range(int(b.x), int(b.x2))
        for y in range(int(b.y), int(b.y2))
    }
    inter = len(cells_a & cells_b)
    union = len(cells_a | cells_b)
    return inter / union


class TestIou:
    def test_identical(self):
        b = BBoxAbs(3, 4, 10, 12)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBoxAbs(0, 0, 10, 10), BBoxAbs(20, 20, 5, 5)) == 0.0

    def test_partial_overlap_vs_grid_oracle(self):
        a = BBoxAbs(0, 0, 10, 10)
        b = BBoxAbs(5, 5, 10, 10)
        expected = _pixel_grid_iou(a, b)
        assert expected == 25 / 175
        assert iou(a, b) == expected

    def test_random_integer_boxes_vs_grid_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = BBoxAbs(*(int(v) for v in rng.integers(0, 12, 2)), *(int(v) for v in rng.integers(1, 10, 2)))
            b = BBoxAbs(*(int(v) for v in rng.integers(0, 12, 2)), *(int(v) for v in rng.integers(1, 10, 2)))
            assert iou(a, b) == pytest.approx(_pixel_grid_iou(a, b), abs=1e-12)


class TestGiou:
    def test_identical_is_one(self):
        b = BBoxNorm(0.5, 0.5, 0.2, 0.2)
        assert giou_norm(b, b) == pytest.approx(1.0)

    def test_disjoint_is_negative(self):
        a = BBoxNorm(0.1, 0.1, 0.1, 0.1)
        b = BBoxNorm(0.9, 0.9, 0.1, 0.1)
        assert giou_norm(a, b) < 0.0

    def test_bounded(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            cx, cy, w, h = _random_inbounds_boxes(rng, 2)[0:4]
            a = BBoxNorm(cx[0], cy[0], w[0], h[0])
            b = BBoxNorm(cx[1], cy[1], w[1], h[1])
            v = giou_norm(a, b)
            assert -1.0 <= v <= 1.0
