"""Synthetic dataset fixtures.

The real dataset is not fetched; these generators produce small maritime-ish
scenes (sky/sea gradient, simple vessel and seamark shapes below the horizon)
with YOLO labels, in the same split/domain structure: train mixes real and
synthetic imagery, val/test are strictly real. The ``paper-shape`` preset
scales the reference split sizes down (default 1%, rounded up to >= 1).
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .boxes import iou
from .dataset import (
    BBoxAbs,
    CategoryTable,
    Dataset,
    ImageRecord,
    load_yolo_dataset,
    merge_datasets,
    save_manifest,
    validate_dataset,
)

# Reference split sizes the preset scales from.
REFERENCE_SPLIT_COUNTS = {"train_real": 199, "train_synthetic": 3582, "val": 49, "test": 50}
REFERENCE_AUGMENTED_COUNT = 5212
# Reference training class mix (motor_boat, sailing_boat, seamark).
CLASS_MIX = (0.62, 0.17, 0.21)

HORIZON = 0.35

_REAL_SKY = (168, 196, 232)
_TINTS = {
    "real": ((168, 196, 232), (44, 84, 132)),
    "dusk": ((232, 170, 120), (90, 70, 80)),
    "rain": ((150, 155, 165), (60, 70, 84)),
}


def _fill(img: np.ndarray, x: int, y: int, w: int, h: int, color) -> None:
    img[y : y + h, x : x + w] = color


def _draw_motor_boat(img, x, y, w, h, rng) -> None:
    hull_h = max(2, int(h * 0.55))
    _fill(img, x, y + h - hull_h, w, hull_h, (120, 30, 30))
    cab_w = max(2, int(w * 0.4))
    _fill(img, x + (w - cab_w) // 2, y, cab_w, h - hull_h, (200, 200, 210))


def _draw_sailing_boat(img, x, y, w, h, rng) -> None:
    hull_h = max(2, int(h * 0.25))
    _fill(img, x, y + h - hull_h, w, hull_h, (60, 40, 30))
    sail_h = h - hull_h
    for row in range(sail_h):
        # triangular sail, widest at the hull
        half = max(1, int(w * 0.45 * (row + 1) / sail_h))
        cx = x + w // 2
        img[y + row, cx - half : cx + half] = (238, 238, 228)


def _draw_seamark(img, x, y, w, h, rng) -> None:
    pole_w = max(2, w // 3)
    _fill(img, x + (w - pole_w) // 2, y + h // 3, pole_w, h - h // 3, (30, 30, 30))
    _fill(img, x, y, w, h // 3, (230, 180, 40))


_DRAWERS = (_draw_motor_boat, _draw_sailing_boat, _draw_seamark)


def _object_dims(class_id: int, rng: np.random.Generator) -> tuple[int, int]:
    if class_id == 0:
        w = int(rng.integers(26, 60))
        h = max(10, int(w * rng.uniform(0.35, 0.55)))
    elif class_id == 1:
        w = int(rng.integers(18, 40))
        h = max(12, int(w * rng.uniform(1.0, 1.4)))
    else:
        w = int(rng.integers(10, 18))
        h = int(rng.integers(26, 44))
    return w, h


def render_scene(
    width: int,
    height: int,
    rng: np.random.Generator,
    class_ids: list[int],
    tint: str = "real",
) -> tuple[np.ndarray, list[tuple[int, BBoxAbs]]]:
    """Render one scene; returns (uint8 HxWx3 raster, [(class_id, bbox)])."""
    sky, sea = _TINTS[tint]
    img = np.zeros((height, width, 3), dtype=np.float64)
    horizon_y = int(HORIZON * height)
    grad = np.linspace(0.85, 1.1, horizon_y)[:, None, None]
    img[:horizon_y] = np.asarray(sky) * grad
    grad = np.linspace(1.15, 0.8, height - horizon_y)[:, None, None]
    img[horizon_y:] = np.asarray(sea) * grad
    # faint wave bands
    for band in range(horizon_y + 4, height, 9):
        img[band] *= rng.uniform(0.92, 1.0)
    img = np.clip(img + rng.normal(0, 2.0, img.shape), 0, 255)

    placed: list[tuple[int, BBoxAbs]] = []
    for class_id in class_ids:
        for _ in range(30):
            w, h = _object_dims(class_id, rng)
            if w >= width - 2 or horizon_y + h >= height:
                continue
            x = int(rng.integers(1, width - w - 1))
            y = int(rng.integers(horizon_y, height - h))
            box = BBoxAbs(x=float(x), y=float(y), w=float(w), h=float(h))
            if all(iou(box, b) <= 0.05 for _, b in placed):
                _DRAWERS[class_id](img, x, y, w, h, rng)
                placed.append((class_id, box))
                break
    return img.astype(np.uint8), placed


def _write_scene_files(
    images_dir: Path,
    labels_dir: Path,
    name: str,
    raster: np.ndarray,
    objects: list[tuple[int, BBoxAbs]],
    width: int,
    height: int,
) -> None:
    PILImage.fromarray(raster).save(images_dir / f"{name}.png", compress_level=1)
    lines = []
    for class_id, b in objects:
        cx = (b.x + b.w / 2) / width
        cy = (b.y + b.h / 2) / height
        lines.append(f"{class_id} {cx:.6f} {cy:.6f} {b.w / width:.6f} {b.h / height:.6f}")
    (labels_dir / f"{name}.txt").write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _scaled(count: int, scale: float) -> int:
    return max(1, math.ceil(count * scale))


def generate_fixture(
    out_dir: str | Path,
    preset: str = "paper-shape",
    scale: float = 0.01,
    seed: int = 7,
    image_size: tuple[int, int] = (320, 240),
) -> tuple[Dataset, Path]:
    """Materialize a fixture dataset on disk and return (dataset, manifest path).

    Layout: ``<out>/<split>_<domain>/{images,labels}`` plus ``manifest.json``.
    """
    if preset != "paper-shape":
        raise ValueError(f"unknown preset {preset!r}")
    out_dir = Path(out_dir)
    width, height = image_size
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    groups = [
        ("train", "real", _scaled(REFERENCE_SPLIT_COUNTS["train_real"], scale)),
        ("train", "synthetic", _scaled(REFERENCE_SPLIT_COUNTS["train_synthetic"], scale)),
        ("val", "real", _scaled(REFERENCE_SPLIT_COUNTS["val"], scale)),
        ("test", "real", _scaled(REFERENCE_SPLIT_COUNTS["test"], scale)),
    ]
    parts = []
    for split, domain, count in groups:
        group_dir = out_dir / f"{split}_{domain}"
        images_dir = group_dir / "images"
        labels_dir = group_dir / "labels"
        images_dir.mkdir(parents=True, exist_ok=True)
        labels_dir.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            n_objects = int(rng.integers(1, 4))
            class_ids = list(rng.choice(3, size=n_objects, p=CLASS_MIX))
            if split == "train" and i == 0:
                # guarantee a patch source for every class in each train domain
                class_ids = [0, 1, 2]
            tint = "real" if domain == "real" else str(rng.choice(["dusk", "rain"]))
            raster, objects = render_scene(width, height, rng, class_ids, tint=tint)
            _write_scene_files(
                images_dir, labels_dir, f"{split}_{domain}_{i:05d}", raster, objects, width, height
            )
        part, _ = load_yolo_dataset(images_dir, labels_dir, split=split, domain=domain)
        parts.append(part)
    dataset = merge_datasets(parts)
    manifest_path = out_dir / "manifest.json"
    save_manifest(dataset, manifest_path)
    return dataset, manifest_path


def paper_shape_dataset() -> Dataset:
    """In-memory dataset with the reference image counts (no files).

    Annotations are omitted; this exists for split/domain bookkeeping tests
    and sampler statistics, which only need counts.
    """
    images = []
    image_id = 1

    def add(split: str, domain: str, count: int):
        nonlocal image_id
        for _ in range(count):
            images.append(
                ImageRecord(
                    image_id=image_id,
                    width=640,
                    height=480,
                    file_path=f"mem://{split}/{domain}/{image_id}.png",
                    domain=domain,
                    split=split,
                )
            )
            image_id += 1

    add("train", "real", REFERENCE_SPLIT_COUNTS["train_real"])
    add("train", "synthetic", REFERENCE_SPLIT_COUNTS["train_synthetic"])
    add("train", "augmented", REFERENCE_AUGMENTED_COUNT)
    add("val", "real", REFERENCE_SPLIT_COUNTS["val"])
    add("test", "real", REFERENCE_SPLIT_COUNTS["test"])
    dataset = Dataset(categories=CategoryTable(), images=tuple(images))
    validate_dataset(dataset)
    return dataset
