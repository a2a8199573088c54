"""Optimal one-to-one assignment between predictions and ground truth.

``min_cost_assignment`` is a Hungarian solver (shortest-augmenting-path
formulation with dual potentials, O(n^2 m)); ``match_predictions`` builds
the detection matching cost

    cost = w_cls * (1 - p_class) + w_l1 * L1(boxes) + w_giou * (1 - GIoU)

over normalized center-form boxes and solves it so every ground-truth box
gets exactly one prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .boxes import BBoxNorm, coco_to_yolo_box, giou_norm
from .dataset import Annotation
from .errors import MatchingError

if TYPE_CHECKING:  # Detection lives with the kernel; no runtime cycle
    from .kernel import Detection


def min_cost_assignment(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost assignment of every row to a distinct column.

    ``cost`` must have n_rows <= n_cols. Returns [(row, col)] sorted by row.
    Augments one row at a time along shortest alternating paths, maintaining
    dual potentials u, v so reduced costs stay nonnegative.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise MatchingError(f"cost matrix must be 2-D, got shape {cost.shape}")
    n, m = cost.shape
    if n == 0:
        return []
    if n > m:
        raise MatchingError(f"need at least as many columns as rows ({n} > {m})")
    if not np.all(np.isfinite(cost)):
        raise MatchingError("cost matrix must be finite")

    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    # row assigned to column j (1-based; 0 = free). Column 0 is a virtual
    # start column holding the row currently being inserted.
    row_of = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        row_of[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of[j0]
            delta = INF
            j1 = -1
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[row_of[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if row_of[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            row_of[j0] = row_of[j1]
            j0 = j1
    pairs = [(int(row_of[j]) - 1, j - 1) for j in range(1, m + 1) if row_of[j] != 0]
    return sorted(pairs)


@dataclass(frozen=True)
class MatchCosts:
    w_cls: float = 1.0
    w_l1: float = 5.0
    w_giou: float = 2.0


@dataclass(frozen=True)
class MatchAssignment:
    pairs: tuple[tuple[int, int], ...]  # (gt_index, pred_index)
    total_cost: float


def pair_cost(
    pred: "Detection", gt_class: int, gt_box: BBoxNorm, costs: MatchCosts
) -> float:
    """Matching cost between one prediction and one ground-truth box.

    Predictions carry a single (class_id, confidence), so the probability
    credited to the ground-truth class is the confidence when the classes
    agree and zero otherwise.
    """
    p_class = pred.confidence if pred.class_id == gt_class else 0.0
    b = pred.bbox
    l1 = (
        abs(b.cx - gt_box.cx)
        + abs(b.cy - gt_box.cy)
        + abs(b.w - gt_box.w)
        + abs(b.h - gt_box.h)
    )
    return (
        costs.w_cls * (1.0 - p_class)
        + costs.w_l1 * l1
        + costs.w_giou * (1.0 - giou_norm(b, gt_box))
    )


def match_predictions(
    preds: Sequence["Detection"],
    gt: Sequence[Annotation],
    image_width: int,
    image_height: int,
    costs: MatchCosts = MatchCosts(),
) -> MatchAssignment:
    """Optimal assignment of ground-truth boxes to predictions.

    Requires len(preds) >= len(gt); each ground-truth annotation is matched
    to exactly one distinct prediction, minimizing the summed pair cost.
    """
    if len(preds) < len(gt):
        raise MatchingError(f"{len(preds)} predictions cannot cover {len(gt)} ground truths")
    if not gt:
        return MatchAssignment(pairs=(), total_cost=0.0)
    gt_norm = [
        (ann.category_id, coco_to_yolo_box(ann.bbox, image_width, image_height))
        for ann in gt
    ]
    cost = np.empty((len(gt), len(preds)))
    for gi, (gt_class, gt_box) in enumerate(gt_norm):
        for pi, pred in enumerate(preds):
            cost[gi, pi] = pair_cost(pred, gt_class, gt_box, costs)
    pairs = min_cost_assignment(cost)
    total = float(sum(cost[gi, pi] for gi, pi in pairs))
    return MatchAssignment(pairs=tuple(pairs), total_cost=total)
