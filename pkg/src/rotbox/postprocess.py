"""Score filtering and greedy rotated non-maximum suppression.

Two NMS implementations share one contract: :func:`rotated_nms` prunes
candidate pairs with an axis-aligned bounding-box test before the exact
rotated-IoU kernel, while :func:`nms_reference` is the O(n^2) oracle with no
shortcuts. Both keep a box at exactly the threshold (suppression is strict
``>``) and break score ties by input index, so outputs are reproducible.
Suppression never crosses image ids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Geometry, Quad, RBox, corners_array, _pairs_intersection_area, iou_matrix

__all__ = ["Detection", "score_filter", "rotated_nms", "nms_reference"]


@dataclass(frozen=True)
class Detection:
    """One detector output: image, geometry, class, confidence."""

    image_id: str
    geometry: Geometry
    class_id: int
    score: float

    def __post_init__(self):
        if not isinstance(self.geometry, (RBox, Quad)):
            raise TypeError(f"geometry must be RBox or Quad, got {type(self.geometry).__name__}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


def score_filter(dets: list[Detection], threshold: float) -> list[Detection]:
    """Stable-order subsequence with score >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return [d for d in dets if d.score >= threshold]


def _check_nms_threshold(iou_threshold: float) -> None:
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")


def _greedy_order(dets: list[Detection]) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))


def rotated_nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy NMS over same-class detections (callers group by class).

    Detections are visited in descending score (ties by input index); each
    kept box suppresses remaining same-image boxes whose rotated IoU with it
    exceeds the threshold. Output preserves the kept (score-descending) order.
    """
    _check_nms_threshold(iou_threshold)
    n = len(dets)
    if n == 0:
        return []
    corners, areas = corners_array([d.geometry for d in dets])
    lo = corners.min(axis=1)
    hi = corners.max(axis=1)
    image_ids = np.array([d.image_id for d in dets])
    alive = np.ones(n, dtype=bool)
    kept: list[int] = []
    for i in _greedy_order(dets):
        if not alive[i]:
            continue
        kept.append(i)
        alive[i] = False
        cand = np.nonzero(
            alive
            & (image_ids == image_ids[i])
            & (lo[:, 0] <= hi[i, 0]) & (hi[:, 0] >= lo[i, 0])
            & (lo[:, 1] <= hi[i, 1]) & (hi[:, 1] >= lo[i, 1])
        )[0]
        if cand.size == 0:
            continue
        inter = _pairs_intersection_area(
            np.broadcast_to(corners[i], (cand.size, 4, 2)), corners[cand]
        )
        union = areas[i] + areas[cand] - inter
        iou = np.where(union > 0.0, inter / np.where(union <= 0.0, 1.0, union), 0.0)
        alive[cand[iou > iou_threshold]] = False
    return [dets[i] for i in kept]


def nms_reference(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Unoptimized greedy NMS oracle: full IoU matrix, plain double loop."""
    _check_nms_threshold(iou_threshold)
    n = len(dets)
    if n == 0:
        return []
    geoms = [d.geometry for d in dets]
    ious = iou_matrix(geoms, geoms)
    order = _greedy_order(dets)
    suppressed = [False] * n
    kept: list[int] = []
    for pos, i in enumerate(order):
        if suppressed[i]:
            continue
        kept.append(i)
        for j in order[pos + 1:]:
            if suppressed[j]:
                continue
            if dets[j].image_id == dets[i].image_id and ious[i, j] > iou_threshold:
                suppressed[j] = True
    return [dets[i] for i in kept]
