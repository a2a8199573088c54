"""Dataset model, YOLO label loading, COCO export, and split statistics.

A ``Dataset`` is a category table plus a list of ``ImageRecord``s. Each image
carries its split (train/val/test), its domain (real/synthetic/augmented) and
absolute-pixel annotations. Loading converts YOLO-style normalized labels to
absolute boxes; export writes stock COCO JSON. The package-native manifest is
COCO plus per-image ``domain`` and ``split`` fields.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from PIL import Image as PILImage

from .boxes import BBoxAbs, BBoxNorm, coco_to_yolo_box, yolo_to_coco_box
from .errors import (
    DatasetValidationError,
    DegenerateBoxError,
    SplitPurityError,
)

SPLITS = ("train", "val", "test")
DOMAINS = ("real", "synthetic", "augmented")
SOURCES = ("original", "pasted")

DEFAULT_CATEGORIES = ((0, "motor_boat"), (1, "sailing_boat"), (2, "seamark"))


@dataclass(frozen=True)
class CategoryTable:
    """Ordered (id, name) pairs; ids must be contiguous from 0."""

    entries: tuple[tuple[int, str], ...] = DEFAULT_CATEGORIES

    def __post_init__(self):
        ids = [cid for cid, _ in self.entries]
        names = [name for _, name in self.entries]
        if ids != list(range(len(ids))):
            raise DatasetValidationError(f"category ids not contiguous from 0: {ids}")
        if len(set(names)) != len(names):
            raise DatasetValidationError(f"duplicate category names: {names}")

    @property
    def ids(self) -> list[int]:
        return [cid for cid, _ in self.entries]

    def name_of(self, category_id: int) -> str:
        return dict(self.entries)[category_id]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, category_id: int) -> bool:
        return 0 <= category_id < len(self.entries)


@dataclass(frozen=True)
class Annotation:
    category_id: int
    bbox: BBoxAbs
    source: str = "original"  # original | pasted
    instance_id: int = 0


@dataclass(frozen=True)
class ImageRecord:
    image_id: int
    width: int
    height: int
    file_path: str
    domain: str  # real | synthetic | augmented
    split: str  # train | val | test
    annotations: tuple[Annotation, ...] = ()


@dataclass(frozen=True)
class Dataset:
    categories: CategoryTable
    images: tuple[ImageRecord, ...] = ()

    def split_images(self, split: str) -> list[ImageRecord]:
        return [im for im in self.images if im.split == split]

    def image_by_id(self, image_id: int) -> ImageRecord:
        for im in self.images:
            if im.image_id == image_id:
                return im
        raise KeyError(image_id)


@dataclass
class LoadReport:
    """Per-directory tally of everything the loader had to work around."""

    images: int = 0
    annotations: int = 0
    missing_label_files: int = 0
    unknown_class: int = 0
    malformed: int = 0
    clamped: int = 0
    degenerate: int = 0
    warnings: list[str] = field(default_factory=list)


def validate_dataset(d: Dataset) -> None:
    """Enforce Dataset invariants; raises DatasetValidationError on violation."""
    seen_ids = set()
    for im in d.images:
        if im.image_id in seen_ids:
            raise DatasetValidationError(f"duplicate image_id {im.image_id}")
        seen_ids.add(im.image_id)
        if im.width <= 0 or im.height <= 0:
            raise DatasetValidationError(
                f"image {im.image_id}: non-positive dims {im.width}x{im.height}"
            )
        if im.split not in SPLITS:
            raise DatasetValidationError(f"image {im.image_id}: bad split {im.split!r}")
        if im.domain not in DOMAINS:
            raise DatasetValidationError(f"image {im.image_id}: bad domain {im.domain!r}")
        if im.split in ("val", "test") and im.domain != "real":
            raise SplitPurityError(
                f"image {im.image_id}: split {im.split!r} must be real, got {im.domain!r}"
            )
        inst_ids = set()
        for ann in im.annotations:
            if ann.category_id not in d.categories:
                raise DatasetValidationError(
                    f"image {im.image_id}: unknown category {ann.category_id}"
                )
            if ann.source not in SOURCES:
                raise DatasetValidationError(
                    f"image {im.image_id}: bad annotation source {ann.source!r}"
                )
            if ann.instance_id in inst_ids:
                raise DatasetValidationError(
                    f"image {im.image_id}: duplicate instance_id {ann.instance_id}"
                )
            inst_ids.add(ann.instance_id)
            b = ann.bbox
            tol = 1e-6  # float slack on the in-bounds check
            if b.w <= 0 or b.h <= 0 or b.x < -tol or b.y < -tol \
                    or b.x2 > im.width + tol or b.y2 > im.height + tol:
                raise DatasetValidationError(
                    f"image {im.image_id}: box {b} out of {im.width}x{im.height} bounds"
                )


def _parse_class_token(tok: str) -> int | None:
    """Accept integer or integral-float class tokens; None otherwise."""
    try:
        val = float(tok)
    except ValueError:
        return None
    if val != int(val):
        return None
    return int(val)


def _parse_label_line(line: str) -> tuple[int, BBoxNorm] | None:
    parts = line.split()
    if len(parts) != 5:
        return None
    cls = _parse_class_token(parts[0])
    if cls is None or cls < 0:
        return None
    try:
        cx, cy, w, h = (float(p) for p in parts[1:])
    except ValueError:
        return None
    return cls, BBoxNorm(cx=cx, cy=cy, w=w, h=h)


def read_image_size(path: Path) -> tuple[int, int]:
    """(width, height) from the image header; pixels are not decoded."""
    with PILImage.open(path) as im:
        return im.size


def load_yolo_dataset(
    images_dir: str | Path,
    labels_dir: str | Path,
    categories: CategoryTable | None = None,
    split: str = "train",
    domain: str = "real",
    image_id_start: int = 1,
) -> tuple[Dataset, LoadReport]:
    """Load a YOLO-style directory pair into a Dataset.

    One ``<stem>.txt`` label file per image, lines ``class cx cy w h``.
    Out-of-bounds boxes are clamped (counted in the report); unknown class
    ids and malformed lines are rejected per line. Missing label files yield
    zero-annotation images with a warning. Image ordering is sorted file
    path, so the result is independent of directory iteration order.
    """
    categories = categories or CategoryTable()
    if split in ("val", "test") and domain != "real":
        raise SplitPurityError(f"split {split!r} must load domain 'real', got {domain!r}")
    images_dir = Path(images_dir)
    labels_dir = Path(labels_dir)
    report = LoadReport()
    records: list[ImageRecord] = []
    image_paths = sorted(p for p in images_dir.iterdir() if p.is_file())
    image_id = image_id_start
    for img_path in image_paths:
        width, height = read_image_size(img_path)
        annotations: list[Annotation] = []
        label_path = labels_dir / (img_path.stem + ".txt")
        if not label_path.exists():
            report.missing_label_files += 1
            report.warnings.append(f"missing label file for {img_path.name}")
        else:
            for raw in label_path.read_text(encoding="utf-8").splitlines():
                line = raw.strip()
                if not line:
                    continue
                parsed = _parse_label_line(line)
                if parsed is None:
                    report.malformed += 1
                    report.warnings.append(f"{label_path.name}: malformed line {raw!r}")
                    continue
                cls, norm = parsed
                if cls not in categories:
                    report.unknown_class += 1
                    report.warnings.append(f"{label_path.name}: unknown class {cls}")
                    continue
                overflow = (
                    norm.cx - norm.w / 2 < -1e-6
                    or norm.cx + norm.w / 2 > 1 + 1e-6
                    or norm.cy - norm.h / 2 < -1e-6
                    or norm.cy + norm.h / 2 > 1 + 1e-6
                )
                try:
                    bbox = yolo_to_coco_box(norm, width, height)
                except DegenerateBoxError:
                    report.degenerate += 1
                    report.warnings.append(f"{label_path.name}: degenerate box {line!r}")
                    continue
                if overflow:
                    report.clamped += 1
                annotations.append(
                    Annotation(
                        category_id=cls,
                        bbox=bbox,
                        source="original",
                        instance_id=len(annotations),
                    )
                )
        records.append(
            ImageRecord(
                image_id=image_id,
                width=width,
                height=height,
                file_path=str(img_path),
                domain=domain,
                split=split,
                annotations=tuple(annotations),
            )
        )
        report.images += 1
        report.annotations += len(annotations)
        image_id += 1
    dataset = Dataset(categories=categories, images=tuple(records))
    validate_dataset(dataset)
    return dataset, report


def merge_datasets(parts: list[Dataset]) -> Dataset:
    """Concatenate datasets, reassigning image ids to stay unique."""
    if not parts:
        raise DatasetValidationError("nothing to merge")
    categories = parts[0].categories
    for p in parts[1:]:
        if p.categories != categories:
            raise DatasetValidationError("category tables differ across merged parts")
    images: list[ImageRecord] = []
    next_id = 1
    for p in parts:
        for im in p.images:
            images.append(replace(im, image_id=next_id))
            next_id += 1
    merged = Dataset(categories=categories, images=tuple(images))
    validate_dataset(merged)
    return merged


# ---------------------------------------------------------------------------
# COCO export / import
# ---------------------------------------------------------------------------

def export_coco_json(d: Dataset) -> dict:
    """Build a stock COCO document (dict) from a Dataset.

    Annotation ids are assigned by (image_id, annotation index) so repeated
    exports of structurally equal datasets are identical.
    """
    images = []
    annotations = []
    ann_id = 1
    for im in sorted(d.images, key=lambda r: r.image_id):
        images.append(
            {
                "id": im.image_id,
                "width": im.width,
                "height": im.height,
                "file_name": Path(im.file_path).name,
            }
        )
        for ann in im.annotations:
            b = ann.bbox
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": im.image_id,
                    "category_id": ann.category_id,
                    "bbox": [b.x, b.y, b.w, b.h],
                    "area": b.w * b.h,
                    "iscrowd": 0,
                }
            )
            ann_id += 1
    categories = [{"id": cid, "name": name} for cid, name in d.categories.entries]
    return {"images": images, "annotations": annotations, "categories": categories}


def coco_json_bytes(doc: dict) -> bytes:
    """Canonical serialized form; identical documents give identical bytes."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_coco_json(d: Dataset, path: str | Path) -> None:
    Path(path).write_bytes(coco_json_bytes(export_coco_json(d)))


def import_coco_json(
    doc: dict, split: str = "train", domain: str = "real"
) -> Dataset:
    """Rebuild a Dataset from a COCO document.

    COCO has no split/domain notion, so all images get the given pair.
    """
    categories = CategoryTable(
        entries=tuple((c["id"], c["name"]) for c in sorted(doc["categories"], key=lambda c: c["id"]))
    )
    anns_by_image: dict[int, list[dict]] = {}
    for ann in doc["annotations"]:
        anns_by_image.setdefault(ann["image_id"], []).append(ann)
    images = []
    for im in sorted(doc["images"], key=lambda i: i["id"]):
        annotations = []
        for idx, ann in enumerate(sorted(anns_by_image.get(im["id"], []), key=lambda a: a["id"])):
            x, y, w, h = ann["bbox"]
            annotations.append(
                Annotation(
                    category_id=ann["category_id"],
                    bbox=BBoxAbs(x=x, y=y, w=w, h=h),
                    source="original",
                    instance_id=idx,
                )
            )
        images.append(
            ImageRecord(
                image_id=im["id"],
                width=im["width"],
                height=im["height"],
                file_path=im["file_name"],
                domain=domain,
                split=split,
                annotations=tuple(annotations),
            )
        )
    dataset = Dataset(categories=categories, images=tuple(images))
    validate_dataset(dataset)
    return dataset


# ---------------------------------------------------------------------------
# Native manifest (COCO + domain/split per image)
# ---------------------------------------------------------------------------

def save_manifest(d: Dataset, path: str | Path) -> None:
    """Write the native JSON manifest. Image paths under the manifest's
    directory are stored relative to it; anything else stays absolute."""
    path = Path(path)
    base = path.parent.resolve()
    images = []
    for im in sorted(d.images, key=lambda r: r.image_id):
        p = Path(im.file_path)
        try:
            file_name = str(p.resolve().relative_to(base))
        except ValueError:
            file_name = str(p)
        images.append(
            {
                "id": im.image_id,
                "width": im.width,
                "height": im.height,
                "file_name": file_name,
                "domain": im.domain,
                "split": im.split,
                "annotations": [
                    {
                        "category_id": a.category_id,
                        "bbox": [a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h],
                        "source": a.source,
                        "instance_id": a.instance_id,
                    }
                    for a in im.annotations
                ],
            }
        )
    doc = {
        "categories": [{"id": cid, "name": name} for cid, name in d.categories.entries],
        "images": images,
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def load_manifest(path: str | Path) -> Dataset:
    path = Path(path)
    base = path.parent.resolve()
    doc = json.loads(path.read_text(encoding="utf-8"))
    categories = CategoryTable(
        entries=tuple((c["id"], c["name"]) for c in sorted(doc["categories"], key=lambda c: c["id"]))
    )
    images = []
    for im in doc["images"]:
        file_path = Path(im["file_name"])
        if not file_path.is_absolute():
            file_path = base / file_path
        annotations = tuple(
            Annotation(
                category_id=a["category_id"],
                bbox=BBoxAbs(*a["bbox"]),
                source=a.get("source", "original"),
                instance_id=a["instance_id"],
            )
            for a in im["annotations"]
        )
        images.append(
            ImageRecord(
                image_id=im["id"],
                width=im["width"],
                height=im["height"],
                file_path=str(file_path),
                domain=im["domain"],
                split=im["split"],
                annotations=annotations,
            )
        )
    dataset = Dataset(categories=categories, images=tuple(images))
    validate_dataset(dataset)
    return dataset


def to_yolo_lines(im: ImageRecord) -> list[str]:
    """YOLO label lines for one image (used when materializing datasets)."""
    lines = []
    for ann in im.annotations:
        n = coco_to_yolo_box(ann.bbox, im.width, im.height)
        lines.append(f"{ann.category_id} {n.cx:.6f} {n.cy:.6f} {n.w:.6f} {n.h:.6f}")
    return lines


# ---------------------------------------------------------------------------
# Split statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitStats:
    """Image counts by (split, domain) and instance counts by (split, class)."""

    image_counts: dict[tuple[str, str], int]
    instance_counts: dict[tuple[str, int], int]

    def images_in(self, split: str, domain: str | None = None) -> int:
        if domain is not None:
            return self.image_counts.get((split, domain), 0)
        return sum(v for (s, _), v in self.image_counts.items() if s == split)

    def instances_in(self, split: str, category_id: int | None = None) -> int:
        if category_id is not None:
            return self.instance_counts.get((split, category_id), 0)
        return sum(v for (s, _), v in self.instance_counts.items() if s == split)

    def class_counts(self, split: str = "train") -> dict[int, int]:
        return {
            cid: n for (s, cid), n in sorted(self.instance_counts.items()) if s == split
        }


def split_stats(d: Dataset) -> SplitStats:
    """Tally images per (split, domain) and instances per (split, class)."""
    image_counts: Counter = Counter()
    instance_counts: Counter = Counter()
    for im in d.images:
        image_counts[(im.split, im.domain)] += 1
        for ann in im.annotations:
            instance_counts[(im.split, ann.category_id)] += 1
    return SplitStats(image_counts=dict(image_counts), instance_counts=dict(instance_counts))


def render_split_table(stats: SplitStats) -> str:
    """Markdown table with the split/domain layout of the dataset summary."""
    header = "| Split | Real | Synthetic | Augmented | Total |"
    rule = "| --- | ---: | ---: | ---: | ---: |"
    rows = []
    for split, label in (("train", "Train"), ("val", "Validation"), ("test", "Test")):
        r = stats.images_in(split, "real")
        s = stats.images_in(split, "synthetic")
        a = stats.images_in(split, "augmented")
        rows.append(f"| {label} | {r} | {s} | {a} | {r + s + a} |")
    return "\n".join([header, rule, *rows])
