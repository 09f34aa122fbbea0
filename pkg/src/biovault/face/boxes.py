"""Axis-aligned detection boxes: delta decoding, IoU, and greedy NMS.

Boxes are (x, y, w, h) with w, h > 0 and a score in [0, 1]. Decoding shifts
the corner by a fraction of the box size and rescales both extents through an
exponential, which keeps them positive for any real delta:

    x' = x + dx * w      w' = w * e^dw
    y' = y + dy * h      h' = h * e^dh
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float
    score: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box extents must be positive, got w={self.w} h={self.h}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class BoxDeltas:
    dx: float
    dy: float
    dw: float
    dh: float


def decode_box(box: BoundingBox, deltas: BoxDeltas) -> BoundingBox:
    """Apply regression deltas; extents stay positive by construction."""
    return BoundingBox(
        x=box.x + deltas.dx * box.w,
        y=box.y + deltas.dy * box.h,
        w=box.w * math.exp(deltas.dw),
        h=box.h * math.exp(deltas.dh),
        score=box.score,
    )


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area; 1.0 for identical boxes, 0.0 when disjoint."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def nms_indices(boxes: list[BoundingBox], iou_threshold: float) -> list[int]:
    """Indices kept by greedy NMS, in descending score order.

    Repeatedly keep the highest-score remaining box and suppress every
    remaining box whose IoU with it exceeds the threshold (strictly). Equal
    scores are broken by insertion order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in [0, 1]")
    if not boxes:
        return []
    # Stable sort on negative score preserves insertion order among ties.
    order = sorted(range(len(boxes)), key=lambda i: -boxes[i].score)
    xs = np.array([boxes[i].x for i in order])
    ys = np.array([boxes[i].y for i in order])
    ws = np.array([boxes[i].w for i in order])
    hs = np.array([boxes[i].h for i in order])
    areas = ws * hs
    alive = np.ones(len(order), dtype=bool)
    kept: list[int] = []
    for i in range(len(order)):
        if not alive[i]:
            continue
        kept.append(order[i])
        rest = alive.copy()
        rest[: i + 1] = False
        idx = np.nonzero(rest)[0]
        if idx.size == 0:
            continue
        ix = np.minimum(xs[i] + ws[i], xs[idx] + ws[idx]) - np.maximum(xs[i], xs[idx])
        iy = np.minimum(ys[i] + hs[i], ys[idx] + hs[idx]) - np.maximum(ys[i], ys[idx])
        inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
        overlap = inter / (areas[i] + areas[idx] - inter)
        alive[idx[overlap > iou_threshold]] = False
    return kept


def nms(boxes: list[BoundingBox], iou_threshold: float) -> list[BoundingBox]:
    """Greedy non-maximum suppression over boxes; see nms_indices."""
    return [boxes[i] for i in nms_indices(boxes, iou_threshold)]
