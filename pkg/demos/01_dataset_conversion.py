#!/usr/bin/env python3
"""Dataset loading, YOLO<->COCO conversion, and split statistics.

Generates a small synthetic fixture (train mixes real + synthetic imagery,
val/test strictly real), loads one YOLO directory pair, converts to COCO,
and prints the split/domain/class summary tables.
"""

import json
from pathlib import Path

from seadet.boxes import BBoxNorm, coco_to_yolo_box, yolo_to_coco_box
from seadet.dataset import (
    export_coco_json,
    load_manifest,
    load_yolo_dataset,
    render_split_table,
    split_stats,
)
from seadet.fixtures import generate_fixture

out = Path("demo_out/01_dataset")
out.mkdir(parents=True, exist_ok=True)

print("== box conversion ==")
norm = BBoxNorm(cx=0.5, cy=0.5, w=0.25, h=0.5)
absolute = yolo_to_coco_box(norm, 640, 480)
print(f"normalized {norm} on 640x480 -> absolute {absolute}")
print(f"and back -> {coco_to_yolo_box(absolute, 640, 480)}")

print("\n== fixture generation (1% of the reference split sizes) ==")
dataset, manifest_path = generate_fixture(out / "fixture", seed=7)
print(f"wrote {len(dataset.images)} images under {out / 'fixture'}")

print("\n== loading one YOLO directory pair ==")
group = out / "fixture" / "train_synthetic"
loaded, report = load_yolo_dataset(group / "images", group / "labels",
                                   split="train", domain="synthetic")
print(f"{report.images} images, {report.annotations} annotations, "
      f"{report.clamped} boxes clamped, {report.malformed} malformed lines")

print("\n== COCO export ==")
doc = export_coco_json(loaded)
coco_path = out / "train_synthetic.coco.json"
coco_path.write_text(json.dumps(doc, indent=1, sort_keys=True))
print(f"{len(doc['images'])} images / {len(doc['annotations'])} annotations "
      f"/ {len(doc['categories'])} categories -> {coco_path}")

print("\n== split statistics ==")
full = load_manifest(manifest_path)
stats = split_stats(full)
print(render_split_table(stats))
print("\ntrain instances per class:", stats.class_counts("train"))
