"""Copy-paste rebalancing of minority classes on the training split.

Instances of deficit classes are cropped out of training images, jittered
(flip, small rotation, brightness/contrast), and alpha-composited onto
training backgrounds of the same domain, below the horizon line and with
bounded overlap against existing boxes. Generated images land in a new
``augmented`` domain; val/test are never touched.

Each generated image draws from its own RNG stream derived from
``(seed, output_image_index)``, so generation order cannot leak randomness
between outputs and the whole run is a pure function of its inputs.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .boxes import BBoxAbs, iou
from .dataset import Annotation, Dataset, ImageRecord, validate_dataset
from .errors import PatchPoolEmptyError, SeadetError

log = logging.getLogger(__name__)

MIN_PATCH_SIDE = 8


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstancePatch:
    """A cropped object instance: float RGB in [0, 255] plus alpha in [0, 1]."""

    rgba: np.ndarray  # (h, w, 4) float64; [..., :3] color, [..., 3] alpha
    source_class: int
    source_image_id: int
    alpha_feather: int

    @property
    def height(self) -> int:
        return self.rgba.shape[0]

    @property
    def width(self) -> int:
        return self.rgba.shape[1]

    @property
    def rgb(self) -> np.ndarray:
        return self.rgba[..., :3]

    @property
    def alpha(self) -> np.ndarray:
        return self.rgba[..., 3]


@dataclass(frozen=True)
class PlacementConstraint:
    max_overlap_iou: float = 0.05
    horizon_fraction: float = 0.35
    max_attempts: int = 50
    scale_jitter: tuple[float, float] = (0.8, 1.2)

    def __post_init__(self):
        if not (0 <= self.max_overlap_iou < 1):
            raise ValueError(f"max_overlap_iou out of range: {self.max_overlap_iou}")
        if not (0 <= self.horizon_fraction < 1):
            raise ValueError(f"horizon_fraction out of range: {self.horizon_fraction}")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        lo, hi = self.scale_jitter
        if lo <= 0 or hi < lo:
            raise ValueError(f"bad scale_jitter range: {self.scale_jitter}")


@dataclass(frozen=True)
class PhotometricParams:
    brightness_delta: float = 0.0  # fraction of full range, in [-0.2, 0.2]
    contrast_scale: float = 1.0  # in [0.8, 1.2]


@dataclass(frozen=True)
class ClassPlan:
    current: int
    target: int

    @property
    def deficit(self) -> int:
        return max(0, self.target - self.current)

    def images_to_generate(self, instances_per_image: int) -> int:
        return math.ceil(self.deficit / instances_per_image)


@dataclass(frozen=True)
class AugmentPlan:
    per_class: dict[int, ClassPlan]
    instances_per_image: int = 1

    def deficits(self) -> dict[int, int]:
        return {cid: p.deficit for cid, p in sorted(self.per_class.items())}

    def total_images(self) -> int:
        return sum(
            p.images_to_generate(self.instances_per_image) for p in self.per_class.values()
        )


@dataclass(frozen=True)
class Placement:
    x: int
    y: int
    scale: float
    width: int  # scaled patch width, px
    height: int  # scaled patch height, px

    @property
    def bbox(self) -> BBoxAbs:
        return BBoxAbs(x=float(self.x), y=float(self.y), w=float(self.width), h=float(self.height))


@dataclass
class AugmentClassReport:
    deficit: int = 0
    generated_images: int = 0
    generated_instances: int = 0
    rejected_placements: int = 0
    skipped_patches: int = 0


@dataclass
class AugmentReport:
    per_class: dict[int, AugmentClassReport] = field(default_factory=dict)
    # provenance, one entry per generated image: enough for an independent
    # verifier to re-check every constraint against the source background
    placements: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "per_class": {
                str(cid): vars(rep) for cid, rep in sorted(self.per_class.items())
            },
            "placements": self.placements,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True), encoding="utf-8")


# ---------------------------------------------------------------------------
# Planning
# ---------------------------------------------------------------------------

def plan_rebalance(
    current: dict[int, int], targets: dict[int, int], instances_per_image: int = 1
) -> AugmentPlan:
    """Per-class paste plan; classes at or above target get deficit 0."""
    if instances_per_image < 1:
        raise ValueError("instances_per_image must be >= 1")
    if any(t < 0 for t in targets.values()):
        raise ValueError("targets must be >= 0")
    per_class = {
        cid: ClassPlan(current=current.get(cid, 0), target=target)
        for cid, target in targets.items()
    }
    return AugmentPlan(per_class=per_class, instances_per_image=instances_per_image)


def render_rebalance_table(plan: AugmentPlan, categories) -> str:
    """Markdown table in the rebalanced-distribution layout."""
    lines = [
        "| Class | Original Instances | After Augmentation (≈) | Change (%) |",
        "| --- | ---: | ---: | ---: |",
    ]
    for cid, p in sorted(plan.per_class.items()):
        target = max(p.current, p.target)
        pct = round((target - p.current) / p.current * 100) if p.current else 0
        change = f"+{pct}%" if pct > 0 else (f"{pct}%" if pct < 0 else "0")
        lines.append(
            f"| {categories.name_of(cid)} | {p.current:,} | {target:,} | {change} |"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Patch extraction
# ---------------------------------------------------------------------------

def feathered_alpha(height: int, width: int, feather: int) -> np.ndarray:
    """Alpha mask that ramps from the border up to 1 over ``feather`` px."""
    if feather <= 0:
        return np.ones((height, width), dtype=np.float64)
    rows = np.minimum(np.arange(height), np.arange(height)[::-1])
    cols = np.minimum(np.arange(width), np.arange(width)[::-1])
    dist = np.minimum(rows[:, None], cols[None, :])
    return np.minimum(1.0, (dist + 1.0) / (feather + 1.0))


def load_raster(path: str | Path) -> np.ndarray:
    """Decode an image file to float64 RGB in [0, 255]."""
    with PILImage.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64)


def _crop_rect(ann: Annotation, im: ImageRecord) -> tuple[int, int, int, int]:
    x0 = max(0, int(round(ann.bbox.x)))
    y0 = max(0, int(round(ann.bbox.y)))
    x1 = min(im.width, int(round(ann.bbox.x2)))
    y1 = min(im.height, int(round(ann.bbox.y2)))
    return x0, y0, x1, y1


def extract_instances(
    d: Dataset,
    classes: set[int],
    feather: int = 3,
    split: str = "train",
) -> tuple[list[InstancePatch], int]:
    """Crop every qualifying annotation into a feathered patch.

    Returns (patches, skipped_count); crops under 8x8 px are skipped.
    """
    patches: list[InstancePatch] = []
    skipped = 0
    for im in d.images:
        if im.split != split:
            continue
        if not any(a.category_id in classes for a in im.annotations):
            continue
        try:
            raster = load_raster(im.file_path)
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable image %s: %s", im.file_path, exc)
            continue
        for ann in im.annotations:
            if ann.category_id not in classes:
                continue
            x0, y0, x1, y1 = _crop_rect(ann, im)
            if x1 - x0 < MIN_PATCH_SIDE or y1 - y0 < MIN_PATCH_SIDE:
                skipped += 1
                continue
            crop = raster[y0:y1, x0:x1]
            alpha = feathered_alpha(y1 - y0, x1 - x0, feather)
            rgba = np.concatenate([crop, alpha[..., None]], axis=2)
            patches.append(
                InstancePatch(
                    rgba=rgba,
                    source_class=ann.category_id,
                    source_image_id=im.image_id,
                    alpha_feather=feather,
                )
            )
    return patches, skipped


# ---------------------------------------------------------------------------
# Patch transforms
# ---------------------------------------------------------------------------

def transform_patch(
    patch: InstancePatch,
    flip: bool = False,
    rotation_deg: float = 0.0,
    photo: PhotometricParams | None = None,
) -> InstancePatch:
    """Flip / rotate / photometric-jitter a patch; alpha follows the raster.

    Neutral arguments short-circuit, so the identity transform is exact.
    """
    rgba = patch.rgba
    if flip:
        rgba = rgba[:, ::-1]
    if rotation_deg != 0.0:
        # rotate color premultiplied by alpha to avoid black-edge bleed
        alpha = rgba[..., 3:]
        pre = np.concatenate([rgba[..., :3] * alpha, alpha], axis=2)
        rot = ndimage.rotate(pre, rotation_deg, axes=(1, 0), reshape=True, order=1, prefilter=False)
        out_alpha = np.clip(rot[..., 3], 0.0, 1.0)
        safe = np.maximum(out_alpha, 1e-9)[..., None]
        rgb = np.clip(rot[..., :3] / safe, 0.0, 255.0)
        rgba = np.concatenate([rgb, out_alpha[..., None]], axis=2)
    else:
        rgba = rgba.copy()
    if photo is not None and (photo.contrast_scale != 1.0 or photo.brightness_delta != 0.0):
        rgb = rgba[..., :3]
        mean = rgb.mean()
        rgb = mean + photo.contrast_scale * (rgb - mean) + photo.brightness_delta * 255.0
        rgba[..., :3] = np.clip(rgb, 0.0, 255.0)
    return InstancePatch(
        rgba=rgba,
        source_class=patch.source_class,
        source_image_id=patch.source_image_id,
        alpha_feather=patch.alpha_feather,
    )


def _scaled_dims(patch: InstancePatch, scale: float) -> tuple[int, int]:
    return max(1, int(round(patch.height * scale))), max(1, int(round(patch.width * scale)))


def _scaled_rgba(patch: InstancePatch, placement: Placement) -> np.ndarray:
    if placement.height == patch.height and placement.width == patch.width:
        return patch.rgba
    zoom = (placement.height / patch.height, placement.width / patch.width, 1.0)
    out = ndimage.zoom(patch.rgba, zoom, order=1, prefilter=False, grid_mode=True, mode="nearest")
    out = out[: placement.height, : placement.width]
    out[..., 3] = np.clip(out[..., 3], 0.0, 1.0)
    out[..., :3] = np.clip(out[..., :3], 0.0, 255.0)
    return out


# ---------------------------------------------------------------------------
# Placement and compositing
# ---------------------------------------------------------------------------

def horizon_row(height: int, horizon_fraction: float) -> int:
    """First pixel row a paste's top edge may occupy."""
    return int(math.ceil(horizon_fraction * height - 1e-9))


def place_instance(
    bg: ImageRecord,
    patch: InstancePatch,
    constraint: PlacementConstraint,
    rng: np.random.Generator,
    extra_boxes: tuple[BBoxAbs, ...] = (),
) -> Placement | None:
    """Rejection-sample a placement for ``patch`` on ``bg``.

    The scaled patch must sit fully inside the image, its top edge at or
    below the horizon row, and overlap no existing box (background
    annotations plus ``extra_boxes``) beyond ``max_overlap_iou``. Returns
    None if ``max_attempts`` draws all fail.
    """
    existing = [a.bbox for a in bg.annotations] + list(extra_boxes)
    y_min = horizon_row(bg.height, constraint.horizon_fraction)
    lo, hi = constraint.scale_jitter
    for _ in range(constraint.max_attempts):
        scale = float(rng.uniform(lo, hi))
        sh, sw = _scaled_dims(patch, scale)
        if sw > bg.width or y_min + sh > bg.height:
            continue
        x = int(rng.integers(0, bg.width - sw + 1))
        y = int(rng.integers(y_min, bg.height - sh + 1))
        candidate = BBoxAbs(x=float(x), y=float(y), w=float(sw), h=float(sh))
        if all(iou(candidate, b) <= constraint.max_overlap_iou for b in existing):
            return Placement(x=x, y=y, scale=scale, width=sw, height=sh)
    return None


def composite(
    bg_raster: np.ndarray, patch: InstancePatch, placement: Placement
) -> tuple[np.ndarray, Annotation]:
    """Alpha-blend the (scaled) patch onto a copy of the background raster.

    out = alpha * patch + (1 - alpha) * background, per pixel.
    """
    out = np.array(bg_raster, dtype=np.float64, copy=True)
    rgba = _scaled_rgba(patch, placement)
    y, x = placement.y, placement.x
    h, w = placement.height, placement.width
    alpha = rgba[..., 3:]
    region = out[y : y + h, x : x + w]
    out[y : y + h, x : x + w] = alpha * rgba[..., :3] + (1.0 - alpha) * region
    ann = Annotation(
        category_id=patch.source_class,
        bbox=placement.bbox,
        source="pasted",
        instance_id=0,
    )
    return out, ann


def save_raster(raster: np.ndarray, path: str | Path) -> None:
    # low compression: these are scratch images and encode time dominates
    img = PILImage.fromarray(np.clip(np.rint(raster), 0, 255).astype(np.uint8))
    img.save(path, compress_level=1)


# ---------------------------------------------------------------------------
# The full augmentation run
# ---------------------------------------------------------------------------

_ROTATIONS = (0.0, 10.0, -10.0)
_BACKGROUND_ROUNDS = 200


def _stream(seed: int, output_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, output_index)))


@dataclass(frozen=True)
class AugmentResult:
    dataset: Dataset
    report: AugmentReport


def run_augmentation(
    d: Dataset,
    plan: AugmentPlan,
    constraint: PlacementConstraint,
    seed: int,
    out_dir: str | Path,
    feather: int = 3,
) -> AugmentResult:
    """Generate pasted images until every class plan is met.

    Generated records carry only the pasted annotations, so per-class
    instance counts land exactly at ``deficit`` rounded up to
    ``instances_per_image`` granularity. Backgrounds keep their own labels
    in the source records; the report's provenance ties each output to its
    background for independent verification.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    deficit_classes = [cid for cid, p in sorted(plan.per_class.items()) if p.deficit > 0]
    report = AugmentReport(
        per_class={
            cid: AugmentClassReport(deficit=p.deficit)
            for cid, p in sorted(plan.per_class.items())
        }
    )
    if not deficit_classes:
        return AugmentResult(dataset=d, report=report)

    patches, _ = extract_instances(d, set(deficit_classes), feather=feather)
    pools: dict[int, list[InstancePatch]] = {cid: [] for cid in deficit_classes}
    for p in patches:
        pools[p.source_class].append(p)
    # the extraction skip count is aggregate; the report wants it per class
    for cid in deficit_classes:
        report.per_class[cid].skipped_patches = _count_small(d, cid)
    domain_of = {im.image_id: im.domain for im in d.images}
    backgrounds: dict[str, list[ImageRecord]] = {}
    for im in sorted(d.split_images("train"), key=lambda r: r.image_id):
        backgrounds.setdefault(im.domain, []).append(im)

    raster_cache: dict[str, np.ndarray] = {}

    def bg_raster(im: ImageRecord) -> np.ndarray:
        if im.file_path not in raster_cache:
            raster_cache[im.file_path] = load_raster(im.file_path)
        return raster_cache[im.file_path]

    new_records: list[ImageRecord] = []
    next_image_id = max((im.image_id for im in d.images), default=0) + 1
    output_index = 0
    for cid in deficit_classes:
        pool = pools[cid]
        if not pool:
            raise PatchPoolEmptyError(
                f"no usable patches for class {d.categories.name_of(cid)} ({cid})"
            )
        class_rep = report.per_class[cid]
        n_images = plan.per_class[cid].images_to_generate(plan.instances_per_image)
        for i in range(n_images):
            rng = _stream(seed, output_index)
            record = None
            for _ in range(_BACKGROUND_ROUNDS):
                first = pool[int(rng.integers(len(pool)))]
                domain = domain_of[first.source_image_id]
                candidates = backgrounds.get(domain, [])
                if not candidates:
                    raise PatchPoolEmptyError(
                        f"no training backgrounds in domain of class {cid} patch"
                    )
                bg = candidates[int(rng.integers(len(candidates)))]
                # all pastes on one background must come from its domain
                same_domain = [p for p in pool if domain_of[p.source_image_id] == domain]
                placed: list[tuple[InstancePatch, Placement]] = []
                extra: list[BBoxAbs] = []
                for paste_idx in range(plan.instances_per_image):
                    patch = first if paste_idx == 0 else same_domain[int(rng.integers(len(same_domain)))]
                    tpatch = transform_patch(
                        patch,
                        flip=bool(rng.random() < 0.5),
                        rotation_deg=_ROTATIONS[int(rng.integers(len(_ROTATIONS)))],
                        photo=PhotometricParams(
                            brightness_delta=float(rng.uniform(-0.2, 0.2)),
                            contrast_scale=float(rng.uniform(0.8, 1.2)),
                        ),
                    )
                    placement = place_instance(bg, tpatch, constraint, rng, tuple(extra))
                    if placement is None:
                        class_rep.rejected_placements += 1
                        placed = []
                        break
                    placed.append((tpatch, placement))
                    extra.append(placement.bbox)
                if placed:
                    raster = np.array(bg_raster(bg), copy=True)
                    annotations = []
                    for inst_id, (tpatch, placement) in enumerate(placed):
                        raster, ann = composite(raster, tpatch, placement)
                        annotations.append(
                            Annotation(
                                category_id=ann.category_id,
                                bbox=ann.bbox,
                                source="pasted",
                                instance_id=inst_id,
                            )
                        )
                    file_name = f"aug_{d.categories.name_of(cid)}_{i:06d}.png"
                    save_raster(raster, out_dir / file_name)
                    record = ImageRecord(
                        image_id=next_image_id,
                        width=bg.width,
                        height=bg.height,
                        file_path=str(out_dir / file_name),
                        domain="augmented",
                        split="train",
                        annotations=tuple(annotations),
                    )
                    report.placements.append(
                        {
                            "image_id": next_image_id,
                            "file_name": file_name,
                            "background_image_id": bg.image_id,
                            "class_id": cid,
                        }
                    )
                    break
            if record is None:
                raise SeadetError(
                    f"could not place class {cid} patch after {_BACKGROUND_ROUNDS} backgrounds"
                )
            new_records.append(record)
            next_image_id += 1
            output_index += 1
            class_rep.generated_images += 1
            class_rep.generated_instances += plan.instances_per_image
    out = Dataset(categories=d.categories, images=tuple(d.images) + tuple(new_records))
    validate_dataset(out)
    return AugmentResult(dataset=out, report=report)


def _count_small(d: Dataset, category_id: int) -> int:
    n = 0
    for im in d.images:
        if im.split != "train":
            continue
        for ann in im.annotations:
            if ann.category_id != category_id:
                continue
            x0, y0, x1, y1 = _crop_rect(ann, im)
            if x1 - x0 < MIN_PATCH_SIDE or y1 - y0 < MIN_PATCH_SIDE:
                n += 1
    return n


# ---------------------------------------------------------------------------
# Independent verification
# ---------------------------------------------------------------------------

def verify_augmentation(
    original: Dataset,
    augmented: Dataset,
    constraint: PlacementConstraint,
    report: AugmentReport,
) -> list[str]:
    """Re-check every constraint from scratch; returns violation messages.

    Checks bounds, the horizon rule, overlap against the source background's
    boxes (via report provenance) and between pasted boxes, and that val/test
    records are untouched. Deliberately shares no state with the placer.
    """
    violations: list[str] = []
    orig_by_id = {im.image_id: im for im in original.images}
    bg_of = {p["image_id"]: p["background_image_id"] for p in report.placements}
    for split in ("val", "test"):
        if original.split_images(split) != augmented.split_images(split):
            violations.append(f"{split} split changed")
    tol = 1e-9
    for im in augmented.images:
        if im.image_id in orig_by_id:
            if orig_by_id[im.image_id] != im:
                violations.append(f"original image {im.image_id} modified")
            continue
        if im.domain != "augmented" or im.split != "train":
            violations.append(f"generated image {im.image_id} has bad domain/split")
        y_min = horizon_row(im.height, constraint.horizon_fraction)
        pasted = [a for a in im.annotations if a.source == "pasted"]
        for ann in pasted:
            b = ann.bbox
            if b.x < -tol or b.y < -tol or b.x2 > im.width + tol or b.y2 > im.height + tol:
                violations.append(f"image {im.image_id}: paste out of bounds {b}")
            if b.y < y_min - tol:
                violations.append(f"image {im.image_id}: paste above horizon ({b.y} < {y_min})")
        bg_id = bg_of.get(im.image_id)
        if bg_id is None:
            violations.append(f"image {im.image_id}: no provenance entry")
            bg_boxes = []
        else:
            bg_boxes = [a.bbox for a in orig_by_id[bg_id].annotations]
        for idx, ann in enumerate(pasted):
            for b in bg_boxes:
                if iou(ann.bbox, b) > constraint.max_overlap_iou + tol:
                    violations.append(
                        f"image {im.image_id}: paste overlaps background box (iou {iou(ann.bbox, b):.4f})"
                    )
            for other in pasted[idx + 1 :]:
                if iou(ann.bbox, other.bbox) > constraint.max_overlap_iou + tol:
                    violations.append(f"image {im.image_id}: pastes overlap each other")
    return violations
