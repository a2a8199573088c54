"""seadet: desk-scale maritime detection pipeline toolkit.

Subpackages cover dataset conversion and statistics (``dataset``),
copy-paste rebalancing (``augment``), domain-weighted epoch sampling
(``sampler``), a deterministic detection kernel with optimal set matching
(``kernel``, ``matching``), COCO-style evaluation (``evaluate``), and the
CLI / ablation harness (``harness``).
"""

from .boxes import BBoxAbs, BBoxNorm, coco_to_yolo_box, iou, yolo_to_coco_box
from .dataset import (
    Annotation,
    CategoryTable,
    Dataset,
    ImageRecord,
    export_coco_json,
    load_manifest,
    load_yolo_dataset,
    save_manifest,
    split_stats,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "BBoxAbs",
    "BBoxNorm",
    "CategoryTable",
    "Dataset",
    "ImageRecord",
    "coco_to_yolo_box",
    "export_coco_json",
    "iou",
    "load_manifest",
    "load_yolo_dataset",
    "save_manifest",
    "split_stats",
    "yolo_to_coco_box",
    "__version__",
]
