import itertools
import json

import pytest

from seadet.config import load_config
from seadet.dataset import load_manifest
from seadet.errors import SeadetError
from seadet.harness import (
    AblationTable,
    aggregate,
    ablate,
    cli,
    dataset_fingerprint,
    enumerate_variants,
    render_ablation_csv,
    render_ablation_markdown,
    run_variant,
    split_content_hash,
    _run_seed,
)


class TestEnumerateVariants:
    def test_eight_variants(self):
        assert len(enumerate_variants()) == 8

    def test_first_and_last(self):
        variants = enumerate_variants()
        first, last = variants[0], variants[-1]
        assert first.label == "Baseline (no enhancements)"
        assert (first.fusion, first.query_init, first.weighting) == (False, False, False)
        assert last.label == "Full model (all enabled)"
        assert (last.fusion, last.query_init, last.weighting) == (True, True, True)

    def test_full_boolean_cube(self):
        triples = {(v.fusion, v.query_init, v.weighting) for v in enumerate_variants()}
        assert triples == set(itertools.product([False, True], repeat=3))

    def test_labels_unique(self):
        labels = [v.label for v in enumerate_variants()]
        assert len(set(labels)) == 8
        slugs = [v.slug for v in enumerate_variants()]
        assert len(set(slugs)) == 8


class TestAggregate:
    def _full_results(self, values=(0.5,)):
        return {v.label: list(values) for v in enumerate_variants()}

    def test_single_seed_zero_std(self):
        table = aggregate(self._full_results((0.7,)))
        assert all(r.std_map50 == 0.0 for r in table.rows)
        assert all(r.n_seeds == 1 for r in table.rows)

    def test_mean_and_population_std(self):
        table = aggregate(self._full_results((0.8, 0.9)))
        assert table.rows[0].mean_map50 == pytest.approx(0.85)
        assert table.rows[0].std_map50 == pytest.approx(0.05)

    def test_missing_variant_errors(self):
        results = self._full_results()
        results.pop("Query only")
        with pytest.raises(SeadetError, match="Query only"):
            aggregate(results)

    def test_row_order_matches_variant_order(self):
        table = aggregate(self._full_results())
        assert [r.variant.label for r in table.rows] == [v.label for v in enumerate_variants()]

    def test_markdown_layout(self):
        text = render_ablation_markdown(aggregate(self._full_results((0.8,))), note="")
        lines = text.splitlines()
        assert lines[0] == "| Variant | Fusion | Query Init. | Weighting | mAP@0.5 |"
        assert len(lines) == 10  # header + rule + 8 rows
        assert lines[2].startswith("| Baseline (no enhancements) | ✗ | ✗ | ✗ |")
        assert lines[9].startswith("| Full model (all enabled) | ✓ | ✓ | ✓ |")

    def test_csv_columns(self):
        f1_means = {v.label: 0.5 for v in enumerate_variants()}
        text = render_ablation_csv(aggregate(self._full_results((0.8, 0.9))), f1_means)
        lines = text.splitlines()
        assert lines[0] == "variant,fusion,query_init,weighting,map50_mean,map50_std,f1_mean,n_seeds"
        assert len(lines) == 9
        assert lines[1].endswith(",0.5,2")


@pytest.fixture(scope="module")
def ablate_env(small_fixture_dir):
    cfg = load_config(None)
    cfg["kernel"]["channels"] = 16
    cfg["kernel"]["k"] = 8
    cfg["sampler"]["epoch_size"] = 64
    dataset = load_manifest(small_fixture_dir / "manifest.json")
    return dataset, cfg


class TestRunVariant:
    def test_cardinality_and_manifest(self, ablate_env):
        dataset, cfg = ablate_env
        variant = enumerate_variants()[0]
        reports, manifest = run_variant(variant, dataset, [1, 2, 3], cfg)
        assert len(reports) == 3
        assert manifest.seeds == (1, 2, 3)
        assert manifest.variant == variant
        assert manifest.hyperparameters["optimizer"] == "AdamW"
        assert manifest.hyperparameters["lr"] == 1e-4
        assert manifest.hyperparameters["patience"] == 20
        assert [s["status"] for s in manifest.seed_status] == ["ok"] * 3

    def test_rerun_identical_reports(self, ablate_env):
        dataset, cfg = ablate_env
        variant = enumerate_variants()[7]
        r1, _ = run_variant(variant, dataset, [1], cfg)
        r2, _ = run_variant(variant, dataset, [1], cfg)
        assert r1[0].to_json() == r2[0].to_json()

    def test_weighting_flag_changes_only_schedule(self, ablate_env):
        dataset, cfg = ablate_env
        variants = {v.label: v for v in enumerate_variants()}
        base = _run_seed(dataset, variants["Baseline (no enhancements)"], 1, cfg)
        weighted = _run_seed(dataset, variants["Weighting only"], 1, cfg)
        assert base.dump_records == weighted.dump_records  # detections untouched
        assert base.schedule_ids != weighted.schedule_ids

    def test_fusion_flag_changes_only_detections(self, ablate_env):
        dataset, cfg = ablate_env
        variants = {v.label: v for v in enumerate_variants()}
        base = _run_seed(dataset, variants["Baseline (no enhancements)"], 1, cfg)
        fused = _run_seed(dataset, variants["Fusion only"], 1, cfg)
        assert base.schedule_ids == fused.schedule_ids
        assert base.dump_records != fused.dump_records

    def test_empty_seeds_error(self, ablate_env):
        dataset, cfg = ablate_env
        with pytest.raises(SeadetError):
            run_variant(enumerate_variants()[0], dataset, [], cfg)

    def test_manifest_records_domain_weights(self, ablate_env):
        dataset, cfg = ablate_env
        variants = {v.label: v for v in enumerate_variants()}
        _, uniform = run_variant(variants["Baseline (no enhancements)"], dataset, [1], cfg)
        _, weighted = run_variant(variants["Weighting only"], dataset, [1], cfg)
        assert uniform.domain_weights == {"real": 1.0, "synthetic": 1.0, "augmented": 1.0}
        assert weighted.domain_weights["real"] > 1.0
        assert uniform.to_json()["variant"]["domain_weights"] is not None


class TestAblate:
    def test_grid_outputs(self, ablate_env, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        dataset, cfg = ablate_env
        out = tmp_path / "tbl.md"
        table = ablate(dataset, cfg, [1, 2], out, jobs=4)
        assert isinstance(table, AblationTable)
        assert len(table.rows) == 8
        assert out.exists() and out.with_suffix(".csv").exists()

        run_dir = tmp_path / "tbl_runs"
        manifests = sorted((run_dir / "manifests").glob("*.json"))
        assert len(manifests) == 8
        docs = [json.loads(p.read_text()) for p in manifests]
        # identical everywhere except the variant block
        stripped = [{k: v for k, v in d.items() if k != "variant"} for d in docs]
        assert all(s == stripped[0] for s in stripped[1:])
        assert len({json.dumps(d["variant"], sort_keys=True) for d in docs}) == 8
        # test split hash constant and correct
        assert stripped[0]["test_split_hash"] == split_content_hash(dataset, "test")
        assert len(list((run_dir / "reports").glob("*.json"))) == 16
        assert len(list((run_dir / "detections").glob("*.jsonl"))) == 16
        assert len(list((run_dir / "schedules").glob("*.txt"))) == 16
        assert len(list((run_dir / "pr").glob("*.csv"))) == 16

    def test_rerun_byte_identical(self, ablate_env, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        dataset, cfg = ablate_env
        out1, out2 = tmp_path / "a" / "t.md", tmp_path / "b" / "t.md"
        ablate(dataset, cfg, [1], out1, jobs=2)
        ablate(dataset, cfg, [1], out2, jobs=2)
        files1 = sorted(p for p in (tmp_path / "a").rglob("*") if p.is_file())
        files2 = sorted(p for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert [p.relative_to(tmp_path / "a") for p in files1] == [
            p.relative_to(tmp_path / "b") for p in files2
        ]
        for p1, p2 in zip(files1, files2):
            assert p1.read_bytes() == p2.read_bytes(), p1.name


class TestFingerprints:
    def test_fingerprint_changes_with_content(self, ablate_env):
        from dataclasses import replace

        dataset, _ = ablate_env
        fp = dataset_fingerprint(dataset)
        images = list(dataset.images)
        images[0] = replace(images[0], width=images[0].width + 1)
        from seadet.dataset import Dataset

        assert dataset_fingerprint(Dataset(dataset.categories, tuple(images))) != fp

    def test_test_hash_ignores_train_changes(self, ablate_env):
        from dataclasses import replace

        dataset, _ = ablate_env
        h = split_content_hash(dataset, "test")
        images = [
            replace(im, width=im.width + 1) if im.split == "train" else im
            for im in dataset.images
        ]
        from seadet.dataset import Dataset

        assert split_content_hash(Dataset(dataset.categories, tuple(images)), "test") == h


class TestJobs:
    def test_env_var_overrides_default(self, monkeypatch):
        from seadet.harness import resolve_jobs

        monkeypatch.setenv("SEADET_JOBS", "3")
        assert resolve_jobs(None) == 3
        assert resolve_jobs(5) == 5  # explicit flag wins
        monkeypatch.delenv("SEADET_JOBS")
        assert resolve_jobs(None) >= 1


class TestCli:
    def test_unknown_flag_exits_2(self):
        assert cli(["convert", "--bogus", "x"]) == 2

    def test_no_subcommand_exits_2(self):
        assert cli([]) == 2

    def test_convert(self, tmp_path, small_fixture_dir):
        out = tmp_path / "coco.json"
        group = small_fixture_dir / "train_real"
        code = cli([
            "convert",
            "--images", str(group / "images"),
            "--labels", str(group / "labels"),
            "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert set(doc.keys()) == {"images", "annotations", "categories"}
        assert len(doc["categories"]) == 3
        assert len(doc["images"]) == 2

    def test_fixture_preset_counts(self, tmp_path):
        out = tmp_path / "fx"
        code = cli(["fixture", "--preset", "paper-shape", "--out", str(out), "--seed", "3"])
        assert code == 0
        ds = load_manifest(out / "manifest.json")
        from seadet.dataset import split_stats

        stats = split_stats(ds)
        assert stats.images_in("train", "real") == 2
        assert stats.images_in("train", "synthetic") == 36
        assert stats.images_in("val") == 1
        assert stats.images_in("test") == 1

    def test_detect_then_eval(self, tmp_path, small_fixture_dir):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"kernel": {"channels": 16, "k": 8}}))
        dets = tmp_path / "dets.jsonl"
        code = cli([
            "detect",
            "--manifest", str(small_fixture_dir / "manifest.json"),
            "--config", str(cfg_path),
            "--out", str(dets),
            "--seed", "4",
        ])
        assert code == 0
        lines = [l for l in dets.read_text().splitlines() if l]
        assert len(lines) == 1  # one test image at 1% scale
        rec = json.loads(lines[0])
        assert rec["depth_used"] == 6
        assert len(rec["detections"]) == 8

        report_path = tmp_path / "report.json"
        pr_path = tmp_path / "pr.csv"
        code = cli([
            "eval",
            "--gt", str(small_fixture_dir / "manifest.json"),
            "--dets", str(dets),
            "--out", str(report_path),
            "--pr-csv", str(pr_path),
        ])
        assert code == 0
        doc = json.loads(report_path.read_text())
        assert set(doc["macro"].keys()) == {"map50", "precision", "recall", "f1"}
        assert pr_path.read_text().startswith("class,confidence,precision,recall")

    def test_eval_accepts_coco_gt(self, tmp_path, small_fixture_dir):
        from seadet.dataset import Dataset, write_coco_json

        ds = load_manifest(small_fixture_dir / "manifest.json")
        test_only = Dataset(ds.categories, tuple(ds.split_images("test")))
        gt_path = tmp_path / "gt.json"
        write_coco_json(test_only, gt_path)
        dets = tmp_path / "dets.jsonl"
        cli([
            "detect",
            "--manifest", str(small_fixture_dir / "manifest.json"),
            "--out", str(dets),
        ])
        code = cli([
            "eval", "--gt", str(gt_path), "--dets", str(dets),
            "--out", str(tmp_path / "r.json"),
        ])
        assert code == 0

    def test_report_renders_reference_values(self, tmp_path):
        metrics = tmp_path / "m.json"
        metrics.write_text(json.dumps(
            {"macro": {"map50": 0.89, "precision": 0.92, "recall": 0.91, "f1": 0.90}}
        ))
        out = tmp_path / "table.md"
        code = cli([
            "report", "--metrics", str(metrics),
            "--scenario", "Actual + Synthetic → Actual",
            "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "| Scenario | mAP@0.5 | Precision | Recall | F1 |"
        assert lines[2] == "| Actual + Synthetic → Actual | 0.89 | 0.92 | 0.91 | 0.90 |"

    def test_ablate_cli(self, tmp_path, small_fixture_dir, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(
            {"kernel": {"channels": 16, "k": 8}, "sampler": {"epoch_size": 32}}
        ))
        out = tmp_path / "tbl.md"
        code = cli([
            "ablate",
            "--manifest", str(small_fixture_dir / "manifest.json"),
            "--config", str(cfg_path),
            "--seeds", "1",
            "--out", str(out),
            "--jobs", "2",
        ])
        assert code == 0
        text = out.read_text()
        assert text.count("\n|") >= 9  # header + rule + 8 rows

    def test_stats_command(self, tmp_path, small_fixture_dir):
        out = tmp_path / "stats.md"
        code = cli(["stats", "--manifest", str(small_fixture_dir / "manifest.json"),
                    "--out", str(out)])
        assert code == 0
        assert out.read_text().splitlines()[0] == "| Split | Real | Synthetic | Augmented | Total |"

    def test_augment_cli(self, tmp_path, small_fixture_dir):
        ds = load_manifest(small_fixture_dir / "manifest.json")
        from seadet.dataset import split_stats

        current = split_stats(ds).class_counts("train")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(
            {"augment": {"targets": {"1": current[1] + 3}}}
        ))
        out = tmp_path / "aug"
        code = cli([
            "augment",
            "--manifest", str(small_fixture_dir / "manifest.json"),
            "--config", str(cfg_path),
            "--out", str(out),
            "--seed", "2",
        ])
        assert code == 0
        assert (out / "manifest.json").exists()
        assert (out / "report.json").exists()
        new_ds = load_manifest(out / "manifest.json")
        assert split_stats(new_ds).class_counts("train")[1] == current[1] + 3

    def test_sample_cli(self, tmp_path, small_fixture_dir):
        out = tmp_path / "schedule.txt"
        code = cli([
            "sample", "--manifest", str(small_fixture_dir / "manifest.json"),
            "--out", str(out), "--seed", "1",
        ])
        assert code == 0
        ds = load_manifest(small_fixture_dir / "manifest.json")
        train_ids = {im.image_id for im in ds.split_images("train")}
        ids = [int(x) for x in out.read_text().split()]
        assert len(ids) == len(train_ids)
        assert set(ids) <= train_ids
