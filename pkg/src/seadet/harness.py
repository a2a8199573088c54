"""Pipeline orchestration: the CLI and the 2^3 ablation grid.

The grid toggles fusion, uncertainty-guided query selection, and
domain-weighted sampling; every variant x seed job runs the same frozen
dataset through sampling, forward passes, and evaluation. No training
happens here, so variant scores validate orchestration and flag isolation,
not detection quality.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import augment as aug
from . import config as cfgmod
from .dataset import (
    Dataset,
    load_manifest,
    load_yolo_dataset,
    render_split_table,
    save_manifest,
    split_stats,
    write_coco_json,
)
from .errors import SeadetError
from .evaluate import (
    MetricsReport,
    detections_from_dump,
    emit_pr_csv,
    evaluate_detections,
    render_metrics_table,
)
from .fixtures import generate_fixture
from .kernel import DetectionKernel, detection_record, read_detection_dump, write_detection_dump
from .sampler import DomainWeights, draw_epoch, weights_for_target_ratio

log = logging.getLogger(__name__)

JOBS_ENV_VAR = "SEADET_JOBS"

# Training-stage settings recorded in manifests for provenance; nothing in
# this package runs an optimizer.
RECORDED_HYPERPARAMETERS = {
    "optimizer": "AdamW",
    "lr": 1e-4,
    "schedule": "cosine",
    "epochs": 100,
    "batch": 8,
    "imgsz": 640,
    "patience": 20,
    "erasing": 0.1,
    "hflip": True,
}

ABLATION_NOTE = (
    "Desk-scale run with fixed seeded weights and no training: the mAP "
    "column validates orchestration and flag isolation, not detection "
    "quality, and is not comparable to full-scale training results. A "
    "disabled Weighting flag means uniform sampling over all training images."
)


# ---------------------------------------------------------------------------
# Variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariantConfig:
    fusion: bool
    query_init: bool
    weighting: bool
    label: str

    @property
    def slug(self) -> str:
        return self.label.split(" (")[0].lower().replace(" + ", "_").replace(" ", "_")


_VARIANT_TABLE = (
    ("Baseline (no enhancements)", False, False, False),
    ("Fusion only", True, False, False),
    ("Query only", False, True, False),
    ("Weighting only", False, False, True),
    ("Fusion + Query", True, True, False),
    ("Fusion + Weighting", True, False, True),
    ("Query + Weighting", False, True, True),
    ("Full model (all enabled)", True, True, True),
)


def enumerate_variants() -> list[VariantConfig]:
    """All 8 flag combinations, baseline first and full model last."""
    return [
        VariantConfig(fusion=f, query_init=q, weighting=w, label=label)
        for label, f, q, w in _VARIANT_TABLE
    ]


# ---------------------------------------------------------------------------
# Fingerprints and manifests
# ---------------------------------------------------------------------------

def _record_digest(im, file_hashes: dict[str, str | None]) -> dict:
    if im.file_path not in file_hashes:
        path = Path(im.file_path)
        if path.is_file():
            file_hashes[im.file_path] = hashlib.sha256(path.read_bytes()).hexdigest()
        else:
            file_hashes[im.file_path] = None
    return {
        "id": im.image_id,
        "width": im.width,
        "height": im.height,
        "domain": im.domain,
        "split": im.split,
        "file_sha256": file_hashes[im.file_path],
        "annotations": [
            [a.category_id, a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h, a.source, a.instance_id]
            for a in im.annotations
        ],
    }


def _hash_records(images, categories) -> str:
    file_hashes: dict[str, str | None] = {}
    doc = {
        "categories": [[cid, name] for cid, name in categories.entries],
        "images": [_record_digest(im, file_hashes) for im in sorted(images, key=lambda r: r.image_id)],
    }
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def dataset_fingerprint(d: Dataset) -> str:
    """Content hash of the whole dataset, including image file bytes."""
    return _hash_records(d.images, d.categories)


def split_content_hash(d: Dataset, split: str) -> str:
    return _hash_records(d.split_images(split), d.categories)


def manifest_timestamp() -> str:
    """Wall clock, unless SOURCE_DATE_EPOCH pins it for reproducible runs."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    return datetime.now(tz=timezone.utc).isoformat()


@dataclass(frozen=True)
class RunManifest:
    """Write-once record of one variant's run configuration."""

    variant: VariantConfig
    seeds: tuple[int, ...]
    dataset_fingerprint: str
    test_split_hash: str
    hyperparameters: dict
    kernel: dict
    sampler: dict
    eval: dict
    depth: int
    created_at: str
    seed_status: tuple[dict, ...]
    domain_weights: dict | None = None

    def to_json(self) -> dict:
        return {
            "variant": {
                "label": self.variant.label,
                "fusion": self.variant.fusion,
                "query_init": self.variant.query_init,
                "weighting": self.variant.weighting,
                # derived from the weighting flag, so it lives in the
                # variant block: everything outside it is flag-independent
                "domain_weights": self.domain_weights,
            },
            "seeds": list(self.seeds),
            "dataset_fingerprint": self.dataset_fingerprint,
            "test_split_hash": self.test_split_hash,
            "hyperparameters": self.hyperparameters,
            "kernel": self.kernel,
            "sampler": self.sampler,
            "eval": self.eval,
            "depth": self.depth,
            "created_at": self.created_at,
            "seed_status": list(self.seed_status),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=1, sort_keys=True), encoding="utf-8"
        )


# ---------------------------------------------------------------------------
# Single (variant, seed) job
# ---------------------------------------------------------------------------

def _combine_seed(base: int, run_seed: int) -> int:
    return int(np.random.SeedSequence((base, run_seed)).generate_state(1)[0])


@dataclass(frozen=True)
class SeedOutcome:
    seed: int
    status: str
    metrics: MetricsReport | None
    curves: dict | None
    dump_records: list[dict]
    schedule_ids: tuple[int, ...]
    weights: DomainWeights | None


def _run_seed(d: Dataset, variant: VariantConfig, seed: int, cfg: dict) -> SeedOutcome:
    train = d.split_images("train")
    counts = Counter(im.domain for im in train)
    if variant.weighting:
        weights = weights_for_target_ratio(counts, cfg["sampler"]["target_real_fraction"])
    else:
        weights = DomainWeights(1.0, 1.0, 1.0)
    epoch_size = cfg["sampler"]["epoch_size"] or len(train)
    schedule = draw_epoch(d, weights, epoch_size, seed=seed)

    kcfg = cfgmod.kernel_config(
        cfg, num_classes=len(d.categories), seed=_combine_seed(cfg["kernel"]["seed"], seed)
    )
    kernel = DetectionKernel(kcfg).with_flags(
        fusion_enabled=variant.fusion, uncertainty_query_enabled=variant.query_init
    )
    depth = cfg["ablation"]["depth"] or kcfg.max_depth
    records = []
    for im in sorted(d.split_images("test"), key=lambda r: r.image_id):
        raster = aug.load_raster(im.file_path)
        trace = kernel.forward(raster, depth=depth)
        records.append(detection_record(im.image_id, trace.final, depth))
    dets = detections_from_dump(records, d)
    metrics, curves = evaluate_detections(
        dets, d, split="test", iou_thresh=cfg["eval"]["iou_threshold"]
    )
    return SeedOutcome(
        seed=seed,
        status="ok",
        metrics=metrics,
        curves=curves,
        dump_records=records,
        schedule_ids=schedule.image_ids,
        weights=weights,
    )


def _run_seed_safe(d, variant, seed, cfg) -> SeedOutcome:
    try:
        return _run_seed(d, variant, seed, cfg)
    except (SeadetError, OSError) as exc:
        log.error("variant %r seed %d failed: %s", variant.label, seed, exc)
        return SeedOutcome(
            seed=seed,
            status=f"error: {exc}",
            metrics=None,
            curves=None,
            dump_records=[],
            schedule_ids=(),
            weights=None,
        )


def _build_manifest(
    variant: VariantConfig,
    seeds: list[int],
    outcomes: list[SeedOutcome],
    d: Dataset,
    cfg: dict,
    created_at: str,
    fingerprint: str | None = None,
    test_hash: str | None = None,
) -> RunManifest:
    kernel_block = {k: v for k, v in cfg["kernel"].items()
                    if k not in ("fusion_enabled", "uncertainty_query_enabled")}
    weights = next((o.weights for o in outcomes if o.weights is not None), None)
    return RunManifest(
        variant=variant,
        seeds=tuple(seeds),
        dataset_fingerprint=fingerprint or dataset_fingerprint(d),
        test_split_hash=test_hash or split_content_hash(d, "test"),
        hyperparameters=dict(RECORDED_HYPERPARAMETERS),
        kernel=kernel_block,
        sampler=dict(cfg["sampler"]),
        eval=dict(cfg["eval"]),
        depth=cfg["ablation"]["depth"] or cfg["kernel"]["d"],
        created_at=created_at,
        seed_status=tuple({"seed": o.seed, "status": o.status} for o in outcomes),
        domain_weights=None if weights is None else {
            "real": weights.w_real,
            "synthetic": weights.w_synthetic,
            "augmented": weights.w_augmented,
        },
    )


def run_variant(
    variant: VariantConfig,
    d: Dataset,
    seeds: list[int],
    cfg: dict,
    created_at: str | None = None,
) -> tuple[list[MetricsReport], RunManifest]:
    """Run one variant over all seeds; returns per-seed reports + manifest."""
    if not seeds:
        raise SeadetError("at least one seed is required")
    outcomes = [_run_seed_safe(d, variant, seed, cfg) for seed in seeds]
    manifest = _build_manifest(
        variant, list(seeds), outcomes, d, cfg, created_at or manifest_timestamp()
    )
    return [o.metrics for o in outcomes if o.metrics is not None], manifest


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationRow:
    variant: VariantConfig
    mean_map50: float
    std_map50: float
    n_seeds: int


@dataclass(frozen=True)
class AblationTable:
    rows: tuple[AblationRow, ...]


def aggregate(results: dict[str, list[float]]) -> AblationTable:
    """Mean/std (population) of per-seed mAP@0.5 for all 8 variants.

    ``results`` maps variant label -> per-seed values; a missing or empty
    variant is an error, never a silent skip.
    """
    rows = []
    for variant in enumerate_variants():
        values = results.get(variant.label)
        if not values:
            raise SeadetError(f"missing results for variant {variant.label!r}")
        arr = np.asarray(values, dtype=np.float64)
        rows.append(
            AblationRow(
                variant=variant,
                mean_map50=float(arr.mean()),
                std_map50=float(arr.std()),
                n_seeds=len(values),
            )
        )
    return AblationTable(rows=tuple(rows))


def render_ablation_markdown(table: AblationTable, note: str = ABLATION_NOTE) -> str:
    check, cross = "✓", "✗"
    lines = []
    if note:
        lines.append(f"> {note}")
        lines.append("")
    lines.append("| Variant | Fusion | Query Init. | Weighting | mAP@0.5 |")
    lines.append("| --- | :-: | :-: | :-: | ---: |")
    for row in table.rows:
        v = row.variant
        lines.append(
            f"| {v.label} | {check if v.fusion else cross} "
            f"| {check if v.query_init else cross} "
            f"| {check if v.weighting else cross} "
            f"| {row.mean_map50:.2f} |"
        )
    return "\n".join(lines)


def render_ablation_csv(table: AblationTable, f1_means: dict[str, float] | None = None) -> str:
    """Full-precision CSV; ``f1_means`` adds the mean-of-runs macro F1."""
    lines = ["variant,fusion,query_init,weighting,map50_mean,map50_std,f1_mean,n_seeds"]
    for row in table.rows:
        v = row.variant
        f1 = "" if f1_means is None else repr(f1_means[v.label])
        lines.append(
            f"{v.label},{int(v.fusion)},{int(v.query_init)},{int(v.weighting)},"
            f"{row.mean_map50!r},{row.std_map50!r},{f1},{row.n_seeds}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# The full grid
# ---------------------------------------------------------------------------

def resolve_jobs(jobs: int | None) -> int:
    if jobs is not None:
        return max(1, jobs)
    env = os.environ.get(JOBS_ENV_VAR)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def ablate(
    d: Dataset,
    cfg: dict,
    seeds: list[int],
    out_table: str | Path,
    run_dir: str | Path | None = None,
    jobs: int | None = None,
) -> AblationTable:
    """Run all 8 variants over all seeds and write the report bundle.

    Outputs: the Markdown table at ``out_table``, a CSV next to it, and one
    manifest / per-seed report / detection dump / sampling schedule under
    ``run_dir`` (default ``<out_table stem>_runs``). Jobs are independent
    and run on a bounded thread pool; output order is fixed by
    (variant index, seed).
    """
    if not seeds:
        raise SeadetError("at least one seed is required")
    out_table = Path(out_table)
    run_dir = Path(run_dir) if run_dir is not None else out_table.parent / (out_table.stem + "_runs")
    variants = enumerate_variants()
    fingerprint = dataset_fingerprint(d)
    test_hash = split_content_hash(d, "test")
    created_at = manifest_timestamp()

    with ThreadPoolExecutor(max_workers=resolve_jobs(jobs)) as pool:
        futures = {
            (vi, seed): pool.submit(_run_seed_safe, d, variant, seed, cfg)
            for vi, variant in enumerate(variants)
            for seed in seeds
        }
        outcomes = {key: future.result() for key, future in futures.items()}

    for sub in ("manifests", "reports", "detections", "schedules", "pr"):
        (run_dir / sub).mkdir(parents=True, exist_ok=True)
    results: dict[str, list[float]] = {}
    f1_means: dict[str, float] = {}
    for vi, variant in enumerate(variants):
        per_seed = [outcomes[(vi, seed)] for seed in seeds]
        manifest = _build_manifest(
            variant, list(seeds), per_seed, d, cfg, created_at, fingerprint, test_hash
        )
        manifest.save(run_dir / "manifests" / f"{variant.slug}.json")
        values = []
        f1_values = []
        for outcome in per_seed:
            stem = f"{variant.slug}_seed{outcome.seed}"
            if outcome.metrics is not None:
                outcome.metrics.save(run_dir / "reports" / f"{stem}.json")
                emit_pr_csv(outcome.curves, run_dir / "pr" / f"{stem}.csv")
                values.append(outcome.metrics.map50)
                f1_values.append(outcome.metrics.f1)
            write_detection_dump(outcome.dump_records, run_dir / "detections" / f"{stem}.jsonl")
            (run_dir / "schedules" / f"{stem}.txt").write_text(
                "\n".join(str(i) for i in outcome.schedule_ids) + "\n", encoding="utf-8"
            )
        results[variant.label] = values
        f1_means[variant.label] = float(np.mean(f1_values)) if f1_values else float("nan")
    table = aggregate(results)
    out_table.parent.mkdir(parents=True, exist_ok=True)
    out_table.write_text(render_ablation_markdown(table) + "\n", encoding="utf-8")
    out_table.with_suffix(".csv").write_text(
        render_ablation_csv(table, f1_means), encoding="utf-8"
    )
    return table


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--jobs", type=int, default=None,
                        help=f"worker threads (default: ${JOBS_ENV_VAR} or CPU count)")
    parser.add_argument("--out", type=Path, required=True, help="output path")
    parser.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seadet", description="Maritime detection pipeline toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="YOLO labels -> COCO JSON")
    p.add_argument("--images", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--split", default="train", choices=["train", "val", "test"])
    p.add_argument("--domain", default="real", choices=["real", "synthetic", "augmented"])
    _add_common(p)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("fixture", help="generate a synthetic dataset fixture")
    p.add_argument("--preset", default="paper-shape")
    p.add_argument("--scale", type=float, default=0.01)
    _add_common(p)
    p.set_defaults(func=_cmd_fixture)

    p = sub.add_parser("augment", help="copy-paste rebalancing of the train split")
    p.add_argument("--manifest", type=Path, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("sample", help="draw one weighted epoch schedule")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--uniform", action="store_true", help="ignore domain weighting")
    _add_common(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("detect", help="forward passes over one split")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--depth", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="evaluate a detection dump against ground truth")
    p.add_argument("--gt", type=Path, required=True, help="COCO JSON or dataset manifest")
    p.add_argument("--dets", type=Path, required=True, help="detection dump (JSON lines)")
    p.add_argument("--pr-csv", type=Path, default=None)
    p.add_argument("--table", type=Path, default=None, help="also write a Markdown row")
    p.add_argument("--scenario", default="run", help="row label for --table")
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run the 8-variant grid over seeds")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--seeds", default="1,2,3", help="comma-separated seed list")
    p.add_argument("--run-dir", type=Path, default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("report", help="render metrics JSON as a Markdown table")
    p.add_argument("--metrics", type=Path, action="append", required=True)
    p.add_argument("--scenario", action="append", default=None)
    _add_common(p)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("stats", help="split/domain/class statistics of a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_stats)

    return parser


def _cmd_convert(args) -> int:
    dataset, rep = load_yolo_dataset(
        args.images, args.labels, split=args.split, domain=args.domain
    )
    write_coco_json(dataset, args.out)
    log.info(
        "converted %d images / %d annotations (%d clamped, %d unknown-class, %d malformed)",
        rep.images, rep.annotations, rep.clamped, rep.unknown_class, rep.malformed,
    )
    return 0


def _cmd_fixture(args) -> int:
    seed = 7 if args.seed is None else args.seed
    dataset, manifest_path = generate_fixture(
        args.out, preset=args.preset, scale=args.scale, seed=seed
    )
    log.info("fixture with %d images at %s", len(dataset.images), manifest_path)
    return 0


def _cmd_augment(args) -> int:
    cfg = cfgmod.load_config(args.config)
    dataset = load_manifest(args.manifest)
    targets = cfgmod.augment_targets(cfg)
    if not targets:
        raise SeadetError("config augment.targets is empty; nothing to do")
    stats = split_stats(dataset)
    plan = aug.plan_rebalance(
        stats.class_counts("train"), targets, cfg["augment"]["instances_per_image"]
    )
    seed = 0 if args.seed is None else args.seed
    out_dir = Path(args.out)
    result = aug.run_augmentation(
        dataset,
        plan,
        cfgmod.placement_constraint(cfg),
        seed=seed,
        out_dir=out_dir / "images",
        feather=cfg["augment"]["feather"],
    )
    result.report.save(out_dir / "report.json")
    (out_dir / "plan.md").write_text(
        aug.render_rebalance_table(plan, dataset.categories) + "\n", encoding="utf-8"
    )
    save_manifest(result.dataset, out_dir / "manifest.json")
    log.info(
        "generated %d images; manifest at %s",
        len(result.dataset.images) - len(dataset.images),
        out_dir / "manifest.json",
    )
    return 0


def _cmd_sample(args) -> int:
    cfg = cfgmod.load_config(args.config)
    dataset = load_manifest(args.manifest)
    train = dataset.split_images("train")
    if args.uniform:
        weights = DomainWeights(1.0, 1.0, 1.0)
    else:
        counts = Counter(im.domain for im in train)
        weights = weights_for_target_ratio(counts, cfg["sampler"]["target_real_fraction"])
    epoch_size = cfg["sampler"]["epoch_size"] or len(train)
    seed = 0 if args.seed is None else args.seed
    schedule = draw_epoch(dataset, weights, epoch_size, seed=seed)
    schedule.save(args.out)
    log.info("schedule of %d draws at %s (weights %s)", epoch_size, args.out, weights)
    return 0


def _cmd_detect(args) -> int:
    cfg = cfgmod.load_config(args.config)
    dataset = load_manifest(args.manifest)
    seed = cfg["kernel"]["seed"] if args.seed is None else args.seed
    kcfg = cfgmod.kernel_config(cfg, num_classes=len(dataset.categories), seed=seed)
    kernel = DetectionKernel(kcfg)
    depth = args.depth or cfg["ablation"]["depth"] or kcfg.max_depth
    records = []
    for im in sorted(dataset.split_images(args.split), key=lambda r: r.image_id):
        trace = kernel.forward(aug.load_raster(im.file_path), depth=depth)
        records.append(detection_record(im.image_id, trace.final, depth))
    write_detection_dump(records, args.out)
    log.info("wrote %d detection records to %s", len(records), args.out)
    return 0


def _load_gt(path: Path) -> Dataset:
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("images") and "split" in doc["images"][0]:
        return load_manifest(path)
    from .dataset import import_coco_json

    return import_coco_json(doc, split="test", domain="real")


def _cmd_eval(args) -> int:
    cfg = cfgmod.load_config(args.config)
    gt = _load_gt(args.gt)
    records = read_detection_dump(args.dets)
    dets = detections_from_dump(records, gt)
    metrics, curves = evaluate_detections(
        dets, gt, split="test", iou_thresh=cfg["eval"]["iou_threshold"]
    )
    metrics.save(args.out)
    if args.pr_csv:
        emit_pr_csv(curves, args.pr_csv)
    if args.table:
        row = (args.scenario, metrics.map50, metrics.precision, metrics.recall, metrics.f1)
        Path(args.table).write_text(render_metrics_table([row]) + "\n", encoding="utf-8")
    log.info("mAP@0.5 %.4f at threshold %.4f", metrics.map50, metrics.confidence_at_max_f1)
    return 0


def _cmd_ablate(args) -> int:
    cfg = cfgmod.load_config(args.config)
    dataset = load_manifest(args.manifest)
    seeds = [int(s) for s in str(args.seeds).split(",") if s.strip()]
    table = ablate(dataset, cfg, seeds, args.out, run_dir=args.run_dir, jobs=args.jobs)
    log.info("ablation table (%d rows) at %s", len(table.rows), args.out)
    return 0


def _metrics_row(path: Path, scenario: str) -> tuple[str, float, float, float, float]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    macro = doc.get("macro", doc)
    return (
        scenario,
        float(macro["map50"]),
        float(macro["precision"]),
        float(macro["recall"]),
        float(macro["f1"]),
    )


def _cmd_report(args) -> int:
    scenarios = args.scenario or []
    rows = []
    for i, path in enumerate(args.metrics):
        label = scenarios[i] if i < len(scenarios) else path.stem
        rows.append(_metrics_row(path, label))
    Path(args.out).write_text(render_metrics_table(rows) + "\n", encoding="utf-8")
    return 0


def _cmd_stats(args) -> int:
    dataset = load_manifest(args.manifest)
    stats = split_stats(dataset)
    text = render_split_table(stats)
    Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cli(argv: list[str] | None = None) -> int:
    """Subcommand dispatch; returns the process exit code."""
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors (code 2)
        return int(exc.code or 0)
    logging.basicConfig(
        level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except SeadetError as exc:
        log.error("%s", exc)
        return 1


def main() -> int:
    return cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
