"""COCO-style detection evaluation at IoU 0.5.

Greedy confidence-ordered matching per image and class, 101-point
interpolated average precision, per-class and macro metrics, and PR-curve
emission. Point metrics (P/R/F1) are reported at the confidence threshold
that maximizes the macro F1, and that threshold is recorded in the report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boxes import BBoxAbs
from .boxes import iou as iou  # re-exported: evaluation's IoU is the geometric one
from .dataset import Dataset
from .errors import EvalError

AP_GRID = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class EvalDetection:
    """One detection in absolute pixels, tagged with its emission index."""

    image_id: int
    class_id: int
    confidence: float
    bbox: BBoxAbs
    index: int = 0


@dataclass(frozen=True)
class DetFlag:
    """Outcome for one detection after matching."""

    image_id: int
    index: int
    class_id: int
    confidence: float
    tp: bool
    matched_instance_id: int | None = None


@dataclass(frozen=True)
class MatchResult:
    flags: tuple[DetFlag, ...]
    gt_counts: dict[int, int]  # per class, over the evaluated split
    iou_thresh: float

    def class_flags(self, class_id: int) -> list[DetFlag]:
        return [f for f in self.flags if f.class_id == class_id]


def greedy_match(
    dets: dict[int, list[EvalDetection]],
    gt: Dataset,
    split: str = "test",
    iou_thresh: float = 0.5,
) -> MatchResult:
    """Match detections to ground truth per image and class.

    Within an image and class, detections are taken in descending
    confidence (ties by emission index); each grabs the unmatched same-class
    ground-truth box with the highest IoU >= ``iou_thresh`` (ties to the
    lower instance id). Leftover detections are false positives.
    """
    gt_counts: dict[int, int] = {cid: 0 for cid in gt.categories.ids}
    flags: list[DetFlag] = []
    for im in sorted(gt.split_images(split), key=lambda r: r.image_id):
        anns = list(im.annotations)
        for ann in anns:
            gt_counts[ann.category_id] += 1
        image_dets = dets.get(im.image_id, [])
        for class_id in gt.categories.ids:
            class_dets = sorted(
                (d for d in image_dets if d.class_id == class_id),
                key=lambda d: (-d.confidence, d.index),
            )
            class_gts = [a for a in anns if a.category_id == class_id]
            taken: set[int] = set()
            for det in class_dets:
                best_key = None
                best_gt = None
                for g in class_gts:
                    if g.instance_id in taken:
                        continue
                    overlap = iou(det.bbox, g.bbox)
                    if overlap < iou_thresh:
                        continue
                    key = (overlap, -g.instance_id)
                    if best_key is None or key > best_key:
                        best_key = key
                        best_gt = g
                if best_gt is not None:
                    taken.add(best_gt.instance_id)
                    flags.append(
                        DetFlag(
                            image_id=det.image_id,
                            index=det.index,
                            class_id=class_id,
                            confidence=det.confidence,
                            tp=True,
                            matched_instance_id=best_gt.instance_id,
                        )
                    )
                else:
                    flags.append(
                        DetFlag(
                            image_id=det.image_id,
                            index=det.index,
                            class_id=class_id,
                            confidence=det.confidence,
                            tp=False,
                        )
                    )
    return MatchResult(flags=tuple(flags), gt_counts=gt_counts, iou_thresh=iou_thresh)


# ---------------------------------------------------------------------------
# PR curves and AP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PRCurve:
    class_id: int
    points: tuple[tuple[float, float, float], ...]  # (recall, precision, confidence)
    ap: float | None  # None when the class has no ground truth

    @property
    def defined(self) -> bool:
        return self.ap is not None


def _sweep(flags: list[DetFlag], total_gt: int) -> list[tuple[float, float, float]]:
    ordered = sorted(flags, key=lambda f: (-f.confidence, f.image_id, f.index))
    points = []
    tp = fp = 0
    for f in ordered:
        if f.tp:
            tp += 1
        else:
            fp += 1
        points.append((tp / total_gt, tp / (tp + fp), f.confidence))
    return points


def interpolated_ap(points: list[tuple[float, float, float]]) -> float:
    """101-point interpolated AP: mean over the recall grid of the max
    precision achieved at or beyond each recall level."""
    if not points:
        return 0.0
    recalls = np.array([p[0] for p in points])
    precisions = np.array([p[1] for p in points])
    # suffix max: best precision at recall >= r for each sweep position
    suffix = np.maximum.accumulate(precisions[::-1])[::-1]
    total = 0.0
    for t in AP_GRID:
        idx = np.searchsorted(recalls, t, side="left")
        if idx < len(recalls):
            total += suffix[idx]
    return total / len(AP_GRID)


def pr_curve(matches: MatchResult, class_id: int) -> PRCurve:
    total_gt = matches.gt_counts.get(class_id, 0)
    if total_gt == 0:
        return PRCurve(class_id=class_id, points=(), ap=None)
    points = _sweep(matches.class_flags(class_id), total_gt)
    return PRCurve(class_id=class_id, points=tuple(points), ap=interpolated_ap(points))


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassMetrics:
    ap: float
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict[int, ClassMetrics]
    map50: float
    precision: float
    recall: float
    f1: float
    confidence_at_max_f1: float

    def to_json(self) -> dict:
        return {
            "per_class": {
                str(cid): vars(m) for cid, m in sorted(self.per_class.items())
            },
            "macro": {
                "map50": self.map50,
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
            },
            "confidence_at_max_f1": self.confidence_at_max_f1,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=1, sort_keys=True), encoding="utf-8"
        )


def _point_metrics(
    flags_by_class: dict[int, list[DetFlag]],
    gt_counts: dict[int, int],
    threshold: float,
) -> dict[int, tuple[float, float, float]]:
    """Per-class (precision, recall, f1) counting detections with
    confidence >= threshold."""
    out = {}
    for cid, flags in flags_by_class.items():
        tp = sum(1 for f in flags if f.tp and f.confidence >= threshold)
        fp = sum(1 for f in flags if not f.tp and f.confidence >= threshold)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / gt_counts[cid]
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out[cid] = (precision, recall, f1)
    return out


def report(matches: MatchResult, curves: dict[int, PRCurve]) -> MetricsReport:
    """Aggregate per-class APs and point metrics into one report.

    Macro values are unweighted means over classes that have ground truth.
    The operating threshold is the detection confidence that maximizes the
    macro F1 (highest such confidence on ties).
    """
    supported = [cid for cid, n in sorted(matches.gt_counts.items()) if n > 0]
    if not supported:
        raise EvalError("no class has ground-truth support")
    for cid in supported:
        if cid not in curves or not curves[cid].defined:
            raise EvalError(f"missing PR curve for supported class {cid}")
    flags_by_class = {cid: matches.class_flags(cid) for cid in supported}
    thresholds = sorted(
        {f.confidence for flags in flags_by_class.values() for f in flags}, reverse=True
    )
    best_threshold = thresholds[0] if thresholds else 1.0
    best_f1 = -1.0
    for t in thresholds or [1.0]:
        metrics = _point_metrics(flags_by_class, matches.gt_counts, t)
        macro_f1 = float(np.mean([m[2] for m in metrics.values()]))
        if macro_f1 > best_f1:
            best_f1 = macro_f1
            best_threshold = t
    chosen = _point_metrics(flags_by_class, matches.gt_counts, best_threshold)
    per_class = {
        cid: ClassMetrics(
            ap=float(curves[cid].ap),
            precision=chosen[cid][0],
            recall=chosen[cid][1],
            f1=chosen[cid][2],
            support=matches.gt_counts[cid],
        )
        for cid in supported
    }
    return MetricsReport(
        per_class=per_class,
        map50=float(np.mean([m.ap for m in per_class.values()])),
        precision=float(np.mean([m.precision for m in per_class.values()])),
        recall=float(np.mean([m.recall for m in per_class.values()])),
        f1=float(np.mean([m.f1 for m in per_class.values()])),
        confidence_at_max_f1=float(best_threshold),
    )


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def emit_pr_csv(curves: dict[int, PRCurve], path: str | Path) -> int:
    """Write per-class PR points plus a macro series on a 101-point
    confidence grid. Returns the number of data rows written."""
    lines = ["class,confidence,precision,recall"]
    defined = [c for _, c in sorted(curves.items()) if c.defined]
    for curve in defined:
        for recall, precision, confidence in curve.points:
            lines.append(f"{curve.class_id},{confidence:.6f},{precision:.6f},{recall:.6f}")
    for t in AP_GRID:
        ps, rs = [], []
        for curve in defined:
            at = [(r, p) for r, p, conf in curve.points if conf >= t]
            if at:
                r, p = at[-1]  # deepest sweep point still above the threshold
            else:
                r, p = 0.0, 0.0
            ps.append(p)
            rs.append(r)
        if defined:
            lines.append(
                f"macro,{t:.6f},{float(np.mean(ps)):.6f},{float(np.mean(rs)):.6f}"
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines) - 1


def render_metrics_table(rows: list[tuple[str, float, float, float, float]]) -> str:
    """Markdown result-summary table, values rendered at 2 decimals."""
    out = [
        "| Scenario | mAP@0.5 | Precision | Recall | F1 |",
        "| --- | ---: | ---: | ---: | ---: |",
    ]
    for scenario, map50, precision, recall, f1 in rows:
        out.append(
            f"| {scenario} | {map50:.2f} | {precision:.2f} | {recall:.2f} | {f1:.2f} |"
        )
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Wiring from files
# ---------------------------------------------------------------------------

def detections_from_dump(records: list[dict], gt: Dataset) -> dict[int, list[EvalDetection]]:
    """Convert normalized dump records to absolute-pixel detections using
    the ground-truth image dimensions."""
    dims = {im.image_id: (im.width, im.height) for im in gt.images}
    out: dict[int, list[EvalDetection]] = {}
    for rec in records:
        image_id = rec["image_id"]
        if image_id not in dims:
            continue
        width, height = dims[image_id]
        dets = []
        for idx, d in enumerate(rec["detections"]):
            cx, cy, w, h = d["bbox_norm"]
            dets.append(
                EvalDetection(
                    image_id=image_id,
                    class_id=d["class_id"],
                    confidence=d["confidence"],
                    bbox=BBoxAbs(
                        x=(cx - w / 2) * width,
                        y=(cy - h / 2) * height,
                        w=w * width,
                        h=h * height,
                    ),
                    index=idx,
                )
            )
        out[image_id] = dets
    return out


def evaluate_detections(
    dets: dict[int, list[EvalDetection]],
    gt: Dataset,
    split: str = "test",
    iou_thresh: float = 0.5,
) -> tuple[MetricsReport, dict[int, PRCurve]]:
    matches = greedy_match(dets, gt, split=split, iou_thresh=iou_thresh)
    curves = {cid: pr_curve(matches, cid) for cid in gt.categories.ids}
    return report(matches, curves), curves
