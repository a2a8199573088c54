import json

import numpy as np
import pytest
from PIL import Image as PILImage

from seadet.boxes import BBoxAbs
from seadet.dataset import (
    Annotation,
    CategoryTable,
    Dataset,
    ImageRecord,
    coco_json_bytes,
    export_coco_json,
    import_coco_json,
    load_manifest,
    load_yolo_dataset,
    merge_datasets,
    render_split_table,
    save_manifest,
    split_stats,
    validate_dataset,
)
from seadet.errors import DatasetValidationError, SplitPurityError
from seadet.fixtures import paper_shape_dataset


def _write_png(path, width=64, height=48):
    arr = np.full((height, width, 3), 90, dtype=np.uint8)
    PILImage.fromarray(arr).save(path)


@pytest.fixture
def yolo_dirs(tmp_path):
    images = tmp_path / "images"
    labels = tmp_path / "labels"
    images.mkdir()
    labels.mkdir()
    return images, labels


def _record(image_id=1, split="train", domain="real", anns=(), width=640, height=480):
    return ImageRecord(
        image_id=image_id,
        width=width,
        height=height,
        file_path=f"mem://{image_id}.png",
        domain=domain,
        split=split,
        annotations=tuple(anns),
    )


class TestLoadYolo:
    def test_known_counts(self, yolo_dirs):
        images, labels = yolo_dirs
        lines = {
            "a": ["0 0.5 0.5 0.2 0.2", "1 0.3 0.7 0.1 0.1"],
            "b": ["2 0.5 0.5 0.4 0.4", "0 0.2 0.6 0.1 0.2", "1 0.8 0.8 0.1 0.1"],
            "c": [],
        }
        for stem, ls in lines.items():
            _write_png(images / f"{stem}.png")
            (labels / f"{stem}.txt").write_text("\n".join(ls) + "\n")
        ds, rep = load_yolo_dataset(images, labels)
        assert rep.images == 3
        assert rep.annotations == 5
        assert len(ds.images) == 3
        assert sum(len(im.annotations) for im in ds.images) == 5

    def test_missing_labels_dir_entries(self, yolo_dirs):
        images, labels = yolo_dirs
        for stem in ("a", "b"):
            _write_png(images / f"{stem}.png")
        ds, rep = load_yolo_dataset(images, labels)
        assert rep.missing_label_files == 2
        assert len(rep.warnings) == 2
        assert all(len(im.annotations) == 0 for im in ds.images)

    def test_unknown_class_rejected(self, yolo_dirs):
        images, labels = yolo_dirs
        _write_png(images / "a.png")
        (labels / "a.txt").write_text("7 0.5 0.5 0.1 0.1\n")
        ds, rep = load_yolo_dataset(images, labels)
        assert rep.unknown_class == 1
        assert len(ds.images[0].annotations) == 0

    def test_integral_float_class_token(self, yolo_dirs):
        images, labels = yolo_dirs
        _write_png(images / "a.png")
        (labels / "a.txt").write_text("1.0 0.5 0.5 0.1 0.1\n1.5 0.5 0.5 0.1 0.1\n")
        ds, rep = load_yolo_dataset(images, labels)
        assert len(ds.images[0].annotations) == 1
        assert ds.images[0].annotations[0].category_id == 1
        assert rep.malformed == 1

    def test_malformed_lines(self, yolo_dirs):
        images, labels = yolo_dirs
        _write_png(images / "a.png")
        (labels / "a.txt").write_text("0 0.5 0.5\nx y z w v\n0 0.5 0.5 0.1 0.1\n")
        ds, rep = load_yolo_dataset(images, labels)
        assert rep.malformed == 2
        assert rep.annotations == 1

    def test_overflowing_box_clamped_with_warning(self, yolo_dirs):
        images, labels = yolo_dirs
        _write_png(images / "a.png", width=100, height=100)
        (labels / "a.txt").write_text("0 0.1 0.1 0.3 0.3\n")
        ds, rep = load_yolo_dataset(images, labels)
        assert rep.clamped == 1
        b = ds.images[0].annotations[0].bbox
        assert (b.x, b.y, b.w, b.h) == (0.0, 0.0, 25.0, 25.0)

    def test_split_purity_is_hard_error(self, yolo_dirs):
        images, labels = yolo_dirs
        with pytest.raises(SplitPurityError):
            load_yolo_dataset(images, labels, split="val", domain="synthetic")

    def test_ordering_is_sorted_path(self, yolo_dirs):
        images, labels = yolo_dirs
        for stem in ("c", "a", "b"):
            _write_png(images / f"{stem}.png")
        ds, _ = load_yolo_dataset(images, labels)
        names = [im.file_path.rsplit("/", 1)[-1] for im in ds.images]
        assert names == sorted(names)


class TestValidation:
    def test_duplicate_image_id(self):
        with pytest.raises(DatasetValidationError):
            validate_dataset(Dataset(CategoryTable(), (_record(1), _record(1))))

    def test_val_must_be_real(self):
        with pytest.raises(SplitPurityError):
            validate_dataset(
                Dataset(CategoryTable(), (_record(1, split="test", domain="synthetic"),))
            )

    def test_out_of_bounds_annotation(self):
        ann = Annotation(category_id=0, bbox=BBoxAbs(600, 400, 100, 100))
        with pytest.raises(DatasetValidationError):
            validate_dataset(Dataset(CategoryTable(), (_record(1, anns=[ann]),)))

    def test_category_table_invariants(self):
        with pytest.raises(DatasetValidationError):
            CategoryTable(entries=((0, "a"), (2, "b")))
        with pytest.raises(DatasetValidationError):
            CategoryTable(entries=((0, "a"), (1, "a")))


class TestCocoExport:
    def _one_image_dataset(self):
        ann = Annotation(category_id=0, bbox=BBoxAbs(240, 120, 160, 240), instance_id=0)
        return Dataset(CategoryTable(), (_record(1, anns=[ann]),))

    def test_lengths(self):
        doc = export_coco_json(self._one_image_dataset())
        assert (len(doc["images"]), len(doc["annotations"]), len(doc["categories"])) == (1, 1, 3)

    def test_area(self):
        doc = export_coco_json(self._one_image_dataset())
        assert doc["annotations"][0]["area"] == 38400
        assert doc["annotations"][0]["bbox"] == [240, 120, 160, 240]
        assert doc["annotations"][0]["iscrowd"] == 0

    def test_export_reload_export_byte_identical(self):
        ds = self._one_image_dataset()
        doc1 = export_coco_json(ds)
        reloaded = import_coco_json(doc1)
        doc2 = export_coco_json(reloaded)
        assert coco_json_bytes(doc1) == coco_json_bytes(doc2)

    def test_pure_function_of_content(self):
        a = export_coco_json(self._one_image_dataset())
        b = export_coco_json(self._one_image_dataset())
        assert coco_json_bytes(a) == coco_json_bytes(b)

    def test_annotation_ids_unique_and_ordered(self):
        anns = [
            Annotation(category_id=0, bbox=BBoxAbs(0, 0, 10, 10), instance_id=0),
            Annotation(category_id=1, bbox=BBoxAbs(20, 20, 10, 10), instance_id=1),
        ]
        ds = Dataset(CategoryTable(), (_record(2, anns=anns), _record(1, anns=anns)))
        doc = export_coco_json(ds)
        ids = [a["id"] for a in doc["annotations"]]
        assert ids == [1, 2, 3, 4]
        assert [a["image_id"] for a in doc["annotations"]] == [1, 1, 2, 2]


class TestManifest:
    def test_round_trip(self, fixture_dir, fixture_dataset):
        path = fixture_dir / "roundtrip.json"
        save_manifest(fixture_dataset, path)
        again = load_manifest(path)
        assert again == fixture_dataset

    def test_relative_paths_in_file(self, fixture_dir):
        doc = json.loads((fixture_dir / "manifest.json").read_text())
        assert all(not f["file_name"].startswith("/") for f in doc["images"])


class TestMerge:
    def test_ids_reassigned(self):
        a = Dataset(CategoryTable(), (_record(5),))
        b = Dataset(CategoryTable(), (_record(5),))
        merged = merge_datasets([a, b])
        assert [im.image_id for im in merged.images] == [1, 2]

    def test_category_mismatch(self):
        a = Dataset(CategoryTable(), (_record(1),))
        b = Dataset(CategoryTable(entries=((0, "x"),)), ())
        with pytest.raises(DatasetValidationError):
            merge_datasets([a, b])


class TestSplitStats:
    def test_paper_shape_counts(self):
        stats = split_stats(paper_shape_dataset())
        assert stats.images_in("train", "real") == 199
        assert stats.images_in("train", "synthetic") == 3582
        assert stats.images_in("train", "augmented") == 5212
        assert stats.images_in("train") == 8993
        assert stats.images_in("val") == 49
        assert stats.images_in("test") == 50

    def test_empty_dataset(self):
        stats = split_stats(Dataset(CategoryTable(), ()))
        assert stats.images_in("train") == 0
        assert stats.instances_in("train") == 0

    def test_known_instance_counts(self):
        anns0 = [Annotation(0, BBoxAbs(0, 0, 5, 5), instance_id=i) for i in range(10)]
        anns1 = [Annotation(1, BBoxAbs(10, 10, 5, 5), instance_id=i + 10) for i in range(5)]
        anns2 = [Annotation(2, BBoxAbs(30, 30, 5, 5), instance_id=i + 20) for i in range(5)]
        ds = Dataset(CategoryTable(), (_record(1, anns=anns0 + anns1 + anns2),))
        stats = split_stats(ds)
        assert stats.class_counts("train") == {0: 10, 1: 5, 2: 5}

    def test_marginals_consistent(self, fixture_dataset):
        stats = split_stats(fixture_dataset)
        for split in ("train", "val", "test"):
            by_domain = sum(
                stats.images_in(split, dom) for dom in ("real", "synthetic", "augmented")
            )
            assert by_domain == stats.images_in(split)

    def test_render_table_structure(self):
        text = render_split_table(split_stats(paper_shape_dataset()))
        lines = text.splitlines()
        assert lines[0] == "| Split | Real | Synthetic | Augmented | Total |"
        assert len(lines) == 5
        assert lines[2] == "| Train | 199 | 3582 | 5212 | 8993 |"
        assert lines[3] == "| Validation | 49 | 0 | 0 | 49 |"
        assert lines[4] == "| Test | 50 | 0 | 0 | 50 |"
