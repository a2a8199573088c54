"""Deterministic, desk-scale detection kernel.

Forward passes only, with fixed seeded weights: a patch-projection stand-in
for the backbone, self-attention on the coarsest scale, FPN-style two-pass
cross-scale fusion, candidate scoring with an uncertainty term, top-K query
selection, and an iterative decoder whose depth can be cut at inference.
Everything is a pure function of (pixels, seeds, config).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .boxes import BBoxNorm
from .errors import KernelError

class Level(Enum):
    """Pyramid levels; the enum value is the stride."""

    S3 = 8
    S4 = 16
    S5 = 32


LEVELS = (Level.S3, Level.S4, Level.S5)


@dataclass(frozen=True)
class FeatureMap:
    level: Level
    values: np.ndarray  # (h, w, c)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class FeaturePyramid:
    maps: tuple[FeatureMap, FeatureMap, FeatureMap]  # S3, S4, S5

    def level(self, level: Level) -> FeatureMap:
        return self.maps[LEVELS.index(level)]

    @property
    def channels(self) -> int:
        return self.maps[0].channels


@dataclass(frozen=True)
class QueryCandidate:
    feature_index: tuple[int, int, int]  # (level index, y, x)
    class_scores: np.ndarray
    localization_score: float

    @property
    def max_class_score(self) -> float:
        return float(np.max(self.class_scores))

    @property
    def uncertainty(self) -> float:
        # disagreement between localization and classification confidence
        return abs(self.localization_score - self.max_class_score)


@dataclass(frozen=True)
class Detection:
    bbox: BBoxNorm  # center form, all coords in [0, 1]
    class_id: int
    confidence: float


@dataclass(frozen=True)
class DecoderTrace:
    layers: tuple[tuple[Detection, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def final(self) -> tuple[Detection, ...]:
        return self.layers[-1]


@dataclass(frozen=True)
class KernelConfig:
    channels: int = 32
    num_classes: int = 3
    num_queries: int = 30  # K
    max_depth: int = 6  # D
    lambda_u: float = 1.0
    w_cls: float = 1.0
    w_l1: float = 5.0
    w_giou: float = 2.0
    seed: int = 0
    fusion_enabled: bool = True
    uncertainty_query_enabled: bool = True


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(seed))


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


# ---------------------------------------------------------------------------
# Backbone stand-in: seeded projection of image patches
# ---------------------------------------------------------------------------

def build_pyramid(image: np.ndarray, seed, channels: int = 32) -> FeaturePyramid:
    """Project stride-sized image patches into one feature map per level.

    Cell (y, x) of the stride-s map sees pixels [y*s:(y+1)*s, x*s:(x+1)*s]
    (zero-padded at the borders), flattened and multiplied by a fixed seeded
    matrix plus bias. Same image and seed give a bitwise-identical pyramid.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise KernelError("empty image")
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    if img.ndim != 3 or img.shape[2] != 3:
        raise KernelError(f"expected HxW or HxWx3 image, got shape {img.shape}")
    img = img / 255.0
    height, width = img.shape[:2]
    rng = _rng(seed)
    maps = []
    for level in LEVELS:
        s = level.value
        h = math.ceil(height / s)
        w = math.ceil(width / s)
        fan_in = s * s * 3
        weight = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_in, channels))
        bias = rng.normal(0.0, 0.1, size=channels)
        padded = np.zeros((h * s, w * s, 3))
        padded[:height, :width] = img
        patches = (
            padded.reshape(h, s, w, s, 3).transpose(0, 2, 1, 3, 4).reshape(h, w, fan_in)
        )
        maps.append(FeatureMap(level=level, values=patches @ weight + bias))
    return FeaturePyramid(maps=tuple(maps))


# ---------------------------------------------------------------------------
# Encoder: intra-scale attention (S5 only) + cross-scale fusion
# ---------------------------------------------------------------------------

def intra_scale_attention(
    m: FeatureMap, seed, return_weights: bool = False
):
    """Single-head self-attention over the flattened map, no positional term.

    Output has the input's shape; attention rows are a softmax, so they sum
    to 1. Without positions, permuting cells permutes outputs identically.
    """
    c = m.channels
    rng = _rng(seed)
    wq = rng.normal(0.0, 1.0 / math.sqrt(c), size=(c, c))
    wk = rng.normal(0.0, 1.0 / math.sqrt(c), size=(c, c))
    wv = rng.normal(0.0, 1.0 / math.sqrt(c), size=(c, c))
    x = m.values.reshape(-1, c)
    attn = softmax((x @ wq) @ (x @ wk).T / math.sqrt(c), axis=1)
    out = (attn @ (x @ wv)).reshape(m.values.shape)
    result = FeatureMap(level=m.level, values=out)
    if return_weights:
        return result, attn
    return result


def _upsample2(values: np.ndarray, target_hw: tuple[int, int]) -> np.ndarray:
    th, tw = target_hw
    up = np.repeat(np.repeat(values, 2, axis=0), 2, axis=1)
    if up.shape[0] < th or up.shape[1] < tw:
        raise KernelError(
            f"upsampled shape {up.shape[:2]} cannot cover target {target_hw}"
        )
    return up[:th, :tw]


def _downsample2(values: np.ndarray, target_hw: tuple[int, int]) -> np.ndarray:
    h, w, c = values.shape
    th, tw = target_hw
    ph, pw = 2 * math.ceil(h / 2), 2 * math.ceil(w / 2)
    padded = np.zeros((ph, pw, c))
    padded[:h, :w] = values
    down = padded.reshape(ph // 2, 2, pw // 2, 2, c).mean(axis=(1, 3))
    if down.shape[:2] != (th, tw):
        raise KernelError(f"downsampled shape {down.shape[:2]} != target {target_hw}")
    return down


def _fusion_weights(seed, channels: int) -> dict[str, np.ndarray]:
    rng = _rng(seed)
    eye = np.eye(channels)
    return {
        name: eye + rng.normal(0.0, 0.1 / math.sqrt(channels), size=(channels, channels))
        for name in ("td_s4", "td_s3", "bu_s4", "bu_s5")
    }


def top_down(p: FeaturePyramid, weights: dict[str, np.ndarray]) -> FeaturePyramid:
    """Coarse-to-fine pass: upsample, add, mix (bias-free, so zero maps to zero)."""
    s3, s4, s5 = (m.values for m in p.maps)
    td4 = (_upsample2(s5, s4.shape[:2]) + s4) @ weights["td_s4"]
    td3 = (_upsample2(td4, s3.shape[:2]) + s3) @ weights["td_s3"]
    return FeaturePyramid(
        maps=(
            FeatureMap(Level.S3, td3),
            FeatureMap(Level.S4, td4),
            FeatureMap(Level.S5, s5),
        )
    )


def bottom_up(p: FeaturePyramid, weights: dict[str, np.ndarray]) -> FeaturePyramid:
    """Fine-to-coarse pass: downsample, add, mix."""
    s3, s4, s5 = (m.values for m in p.maps)
    bu4 = (_downsample2(s3, s4.shape[:2]) + s4) @ weights["bu_s4"]
    bu5 = (_downsample2(bu4, s5.shape[:2]) + s5) @ weights["bu_s5"]
    return FeaturePyramid(
        maps=(
            FeatureMap(Level.S3, s3),
            FeatureMap(Level.S4, bu4),
            FeatureMap(Level.S5, bu5),
        )
    )


def cross_scale_fuse(p: FeaturePyramid, seed, enabled: bool = True) -> FeaturePyramid:
    """Two-pass cross-scale fusion; with ``enabled=False`` it is the identity."""
    if not enabled:
        return p
    channels = p.channels
    for m in p.maps:
        if m.channels != channels:
            raise KernelError("pyramid channels inconsistent")
    weights = _fusion_weights(seed, channels)
    return bottom_up(top_down(p, weights), weights)


# ---------------------------------------------------------------------------
# Query scoring and selection
# ---------------------------------------------------------------------------

def score_candidates(
    p: FeaturePyramid, head_seed, num_classes: int = 3
) -> list[QueryCandidate]:
    """One candidate per feature cell, in (level, y, x) order.

    Class scores are a softmax, localization a sigmoid; the uncertainty is
    their disagreement |localization - max class score|.
    """
    c = p.channels
    rng = _rng(head_seed)
    w_cls = rng.normal(0.0, 1.0 / math.sqrt(c), size=(c, num_classes))
    b_cls = rng.normal(0.0, 0.1, size=num_classes)
    w_loc = rng.normal(0.0, 1.0 / math.sqrt(c), size=c)
    b_loc = float(rng.normal(0.0, 0.1))
    candidates = []
    for level_idx, fmap in enumerate(p.maps):
        scores = softmax(fmap.values @ w_cls + b_cls, axis=-1)
        locs = sigmoid(fmap.values @ w_loc + b_loc)
        for y in range(fmap.height):
            for x in range(fmap.width):
                candidates.append(
                    QueryCandidate(
                        feature_index=(level_idx, y, x),
                        class_scores=scores[y, x],
                        localization_score=float(locs[y, x]),
                    )
                )
    return candidates


def select_queries(
    candidates: list[QueryCandidate], k: int, lambda_u: float
) -> list[int]:
    """Indices of the top-k candidates by utility, best first.

    utility = max class score - lambda_u * uncertainty. Ties go to the
    smaller (level, y, x) feature index, which also makes the result
    independent of the input list's construction order.
    """
    if k > len(candidates):
        raise KernelError(f"k={k} exceeds {len(candidates)} candidates")
    if lambda_u < 0:
        raise KernelError(f"lambda_u must be nonnegative, got {lambda_u}")
    utilities = [c.max_class_score - lambda_u * c.uncertainty for c in candidates]
    order = sorted(
        range(len(candidates)),
        key=lambda i: (-utilities[i], candidates[i].feature_index),
    )
    return order[:k]


# ---------------------------------------------------------------------------
# Decoder
# ---------------------------------------------------------------------------

def _decoder_weights(seed, channels: int, num_classes: int, max_depth: int):
    rng = _rng(seed)
    scale = 1.0 / math.sqrt(channels)
    layers = [
        {name: rng.normal(0.0, scale, size=(channels, channels)) for name in ("wq", "wk", "wv")}
        for _ in range(max_depth)
    ]
    head = {
        "w_box": rng.normal(0.0, scale, size=(channels, 4)),
        "b_box": rng.normal(0.0, 0.1, size=4),
        "w_cls": rng.normal(0.0, scale, size=(channels, num_classes)),
        "b_cls": rng.normal(0.0, 0.1, size=num_classes),
    }
    return layers, head


def _head_detections(q: np.ndarray, head: dict[str, np.ndarray]) -> tuple[Detection, ...]:
    boxes = sigmoid(q @ head["w_box"] + head["b_box"])
    probs = softmax(q @ head["w_cls"] + head["b_cls"], axis=-1)
    dets = []
    for row in range(q.shape[0]):
        cx, cy, w, h = boxes[row]
        class_id = int(np.argmax(probs[row]))
        dets.append(
            Detection(
                bbox=BBoxNorm(cx=float(cx), cy=float(cy), w=float(w), h=float(h)),
                class_id=class_id,
                confidence=float(probs[row, class_id]),
            )
        )
    return tuple(dets)


def decode(
    queries: list[QueryCandidate],
    p: FeaturePyramid,
    depth: int,
    seed,
    num_classes: int = 3,
    max_depth: int = 6,
) -> DecoderTrace:
    """Iterative refinement trace, truncated at ``depth``.

    Each layer cross-attends the query vectors to all pyramid cells and adds
    the attended values; a head shared across layers emits one detection per
    query. Weights for all ``max_depth`` layers are built up front, so the
    trace at a shallower depth is a bitwise prefix of a deeper one.
    """
    if not 1 <= depth <= max_depth:
        raise KernelError(f"depth {depth} outside [1, {max_depth}]")
    channels = p.channels
    layers, head = _decoder_weights(seed, channels, num_classes, max_depth)
    tokens = np.concatenate([m.values.reshape(-1, channels) for m in p.maps], axis=0)
    gathered = []
    for cand in queries:
        level_idx, y, x = cand.feature_index
        gathered.append(p.maps[level_idx].values[y, x])
    q = np.array(gathered)
    out_layers = []
    for layer in layers[:depth]:
        attn = softmax((q @ layer["wq"]) @ (tokens @ layer["wk"]).T / math.sqrt(channels), axis=1)
        q = q + attn @ (tokens @ layer["wv"])
        out_layers.append(_head_detections(q, head))
    return DecoderTrace(layers=tuple(out_layers))


# ---------------------------------------------------------------------------
# Full forward pass
# ---------------------------------------------------------------------------

class DetectionKernel:
    """Fixed-weight forward pipeline over one seeded weight set.

    Component seeds derive from ``config.seed``, so one integer pins the
    whole weight set. Instances are immutable after construction and safe
    to share across threads.
    """

    def __init__(self, config: KernelConfig):
        self.config = config
        children = np.random.SeedSequence(config.seed).spawn(4)
        self._proj_seed, self._attn_seed, self._fuse_seed, self._head_seed = children

    def encode(self, image: np.ndarray) -> FeaturePyramid:
        pyramid = build_pyramid(image, self._proj_seed, channels=self.config.channels)
        s5 = intra_scale_attention(pyramid.level(Level.S5), self._attn_seed)
        pyramid = FeaturePyramid(maps=(pyramid.maps[0], pyramid.maps[1], s5))
        return cross_scale_fuse(pyramid, self._fuse_seed, enabled=self.config.fusion_enabled)

    def candidates(self, pyramid: FeaturePyramid) -> list[QueryCandidate]:
        return score_candidates(pyramid, self._head_seed, num_classes=self.config.num_classes)

    def forward(self, image: np.ndarray, depth: int | None = None) -> DecoderTrace:
        depth = self.config.max_depth if depth is None else depth
        pyramid = self.encode(image)
        cands = self.candidates(pyramid)
        lam = self.config.lambda_u if self.config.uncertainty_query_enabled else 0.0
        picked = select_queries(cands, min(self.config.num_queries, len(cands)), lam)
        return decode(
            [cands[i] for i in picked],
            pyramid,
            depth,
            self._head_seed,
            num_classes=self.config.num_classes,
            max_depth=self.config.max_depth,
        )

    def detect(self, image: np.ndarray, depth: int | None = None) -> tuple[Detection, ...]:
        return self.forward(image, depth=depth).final

    def with_flags(self, fusion_enabled: bool, uncertainty_query_enabled: bool) -> "DetectionKernel":
        return DetectionKernel(
            replace(
                self.config,
                fusion_enabled=fusion_enabled,
                uncertainty_query_enabled=uncertainty_query_enabled,
            )
        )


# ---------------------------------------------------------------------------
# Detection dump (JSON lines, one record per image)
# ---------------------------------------------------------------------------

def detection_record(image_id: int, detections: tuple[Detection, ...], depth_used: int) -> dict:
    return {
        "image_id": image_id,
        "detections": [
            {
                "class_id": d.class_id,
                "confidence": d.confidence,
                "bbox_norm": [d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h],
            }
            for d in detections
        ],
        "depth_used": depth_used,
    }


def write_detection_dump(records: list[dict], path: str | Path) -> None:
    lines = [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_detection_dump(path: str | Path) -> list[dict]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(json.loads(line))
    return records
