"""Bounding-box types and YOLO <-> COCO coordinate conversion.

Two box forms are used throughout the package:

* ``BBoxNorm`` -- YOLO-style center form, all fields fractions of the image
  size: ``(cx, cy, w, h)``.
* ``BBoxAbs`` -- COCO-style absolute pixel form, top-left anchored:
  ``(x, y, w, h)``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DegenerateBoxError, InvalidImageGeometryError

# Minimum pixel extent a converted box may have before it counts as collapsed.
DEGENERATE_EPS = 1e-9

# Slack allowed on normalized-box overflow before clamping kicks in loudly.
NORM_EPS = 1e-6


@dataclass(frozen=True)
class BBoxNorm:
    """Normalized center-form box; fields are fractions of image size."""

    cx: float
    cy: float
    w: float
    h: float


@dataclass(frozen=True)
class BBoxAbs:
    """Absolute pixel box, (x, y) is the top-left corner."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


def _check_image_dims(width: float, height: float) -> None:
    if width <= 0 or height <= 0:
        raise InvalidImageGeometryError(
            f"image dimensions must be positive, got {width}x{height}"
        )


def yolo_to_coco_box(b: BBoxNorm, width: float, height: float) -> BBoxAbs:
    """Convert a normalized center-form box to absolute pixels.

    The result is clamped to the image bounds. Boxes that collapse below
    ``DEGENERATE_EPS`` pixels after clamping raise ``DegenerateBoxError``.
    """
    _check_image_dims(width, height)
    if b.w <= 0 or b.h <= 0:
        raise DegenerateBoxError(f"non-positive normalized extent: {b}")
    x0 = min(max((b.cx - b.w / 2) * width, 0.0), float(width))
    x1 = min(max((b.cx + b.w / 2) * width, 0.0), float(width))
    y0 = min(max((b.cy - b.h / 2) * height, 0.0), float(height))
    y1 = min(max((b.cy + b.h / 2) * height, 0.0), float(height))
    w = x1 - x0
    h = y1 - y0
    if w < DEGENERATE_EPS or h < DEGENERATE_EPS:
        raise DegenerateBoxError(
            f"box {b} degenerates to {w}x{h} px on a {width}x{height} image"
        )
    return BBoxAbs(x=x0, y=y0, w=w, h=h)


def coco_to_yolo_box(b: BBoxAbs, width: float, height: float) -> BBoxNorm:
    """Convert an absolute pixel box to normalized center form.

    Exact algebraic inverse of :func:`yolo_to_coco_box` for in-bounds boxes.
    """
    _check_image_dims(width, height)
    if b.w < DEGENERATE_EPS or b.h < DEGENERATE_EPS:
        raise DegenerateBoxError(f"degenerate absolute box: {b}")
    return BBoxNorm(
        cx=(b.x + b.w / 2) / width,
        cy=(b.y + b.h / 2) / height,
        w=b.w / width,
        h=b.h / height,
    )


def iou(a: BBoxAbs, b: BBoxAbs) -> float:
    """Intersection-over-union of two absolute boxes; 0.0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def norm_to_corners(b: BBoxNorm) -> tuple[float, float, float, float]:
    """(x0, y0, x1, y1) corners of a normalized center-form box."""
    return (b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2)


def giou_norm(a: BBoxNorm, b: BBoxNorm) -> float:
    """Generalized IoU of two normalized boxes, in [-1, 1].

    GIoU = IoU - |C \\ (A u B)| / |C| with C the smallest enclosing box.
    """
    ax0, ay0, ax1, ay1 = norm_to_corners(a)
    bx0, by0, bx1, by1 = norm_to_corners(b)
    ix = min(ax1, bx1) - max(ax0, bx0)
    iy = min(ay1, by1) - max(ay0, by0)
    inter = max(ix, 0.0) * max(iy, 0.0)
    area_a = (ax1 - ax0) * (ay1 - ay0)
    area_b = (bx1 - bx0) * (by1 - by0)
    union = area_a + area_b - inter
    iou_val = inter / union if union > 0 else 0.0
    cx = max(ax1, bx1) - min(ax0, bx0)
    cy = max(ay1, by1) - min(ay0, by0)
    hull = cx * cy
    if hull <= 0:
        return iou_val
    return iou_val - (hull - union) / hull
