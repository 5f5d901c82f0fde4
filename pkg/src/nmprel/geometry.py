"""Axis-aligned box arithmetic and the pairwise spatial descriptor.

Boxes are ``(x, y, w, h)`` with ``(x, y)`` the top-left corner in pixels and
the y axis pointing down, as in image coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPATIAL_DIM = 14


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ValueError(f"non-finite box {self!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive width and height, got {self!r}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    if a == b:
        return 1.0
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # rounding in x + w can push nearly-identical boxes past 1
    return min(inter / (a.area + b.area - inter), 1.0)


def union_box(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    """Smallest box enclosing both ``a`` and ``b``."""
    x1 = min(a.x, b.x)
    y1 = min(a.y, b.y)
    return BoundingBox(x1, y1, max(a.x2, b.x2) - x1, max(a.y2, b.y2) - y1)


def box_delta(src: BoundingBox, dst: BoundingBox) -> tuple[float, float, float, float]:
    """Regression offsets mapping ``src`` onto ``dst``.

    Center shifts are scaled by the source size; size terms are log ratios.
    """
    return (
        (dst.cx - src.cx) / src.w,
        (dst.cy - src.cy) / src.h,
        math.log(dst.w / src.w),
        math.log(dst.h / src.h),
    )


def apply_delta(src: BoundingBox, delta) -> BoundingBox:
    """Inverse of :func:`box_delta`."""
    dx, dy, dw, dh = delta
    w = src.w * math.exp(dw)
    h = src.h * math.exp(dh)
    cx = src.cx + dx * src.w
    cy = src.cy + dy * src.h
    return BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h)


def norm_distance(a: BoundingBox, b: BoundingBox, image_w: float, image_h: float) -> float:
    """Center-to-center distance divided by the image diagonal."""
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    return math.hypot(b.cx - a.cx, b.cy - a.cy) / math.hypot(image_w, image_h)


def spatial_location(b_i: BoundingBox, b_j: BoundingBox, image_w: float, image_h: float) -> np.ndarray:
    """14-d spatial descriptor of the ordered pair (subject ``b_i``, object ``b_j``).

    Layout: delta(b_i, b_j), delta(b_i, u), delta(b_j, u), iou, distance,
    where ``u`` is the union box of the pair.
    """
    u = union_box(b_i, b_j)
    out = np.empty(SPATIAL_DIM, dtype=np.float64)
    out[0:4] = box_delta(b_i, b_j)
    out[4:8] = box_delta(b_i, u)
    out[8:12] = box_delta(b_j, u)
    out[12] = iou(b_i, b_j)
    out[13] = norm_distance(b_i, b_j, image_w, image_h)
    return out


def boxes_to_array(boxes) -> np.ndarray:
    """Stack boxes into an ``(n, 4)`` float64 array of ``x, y, w, h``."""
    arr = np.array([b.as_tuple() for b in boxes], dtype=np.float64)
    return arr.reshape(len(boxes), 4)
