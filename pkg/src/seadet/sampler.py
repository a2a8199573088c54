"""Domain-aware epoch sampling.

Training epochs are drawn with replacement, each image weighted by its
domain (real / synthetic / augmented). Only weight ratios matter.
``weights_for_target_ratio`` solves for the weights that make the expected
real fraction per draw hit a requested value.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import SamplerError

@dataclass(frozen=True)
class DomainWeights:
    w_real: float = 1.0
    w_synthetic: float = 1.0
    w_augmented: float = 1.0

    def __post_init__(self):
        if min(self.w_real, self.w_synthetic, self.w_augmented) <= 0:
            raise SamplerError(f"weights must be positive: {self}")

    def of(self, domain: str) -> float:
        return {
            "real": self.w_real,
            "synthetic": self.w_synthetic,
            "augmented": self.w_augmented,
        }[domain]


@dataclass(frozen=True)
class SampleSchedule:
    image_ids: tuple[int, ...]

    @property
    def epoch_size(self) -> int:
        return len(self.image_ids)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            "\n".join(str(i) for i in self.image_ids) + "\n", encoding="utf-8"
        )


def weights_for_target_ratio(
    counts: dict[str, int], target_real_fraction: float
) -> DomainWeights:
    """Weights making the expected real fraction equal the target.

    Non-real weights are pinned at 1; the real weight follows from
    w_real * n_real / (w_real * n_real + n_other) = target.
    """
    n_real = counts.get("real", 0)
    n_synth = counts.get("synthetic", 0)
    n_aug = counts.get("augmented", 0)
    if n_real <= 0:
        raise SamplerError("cannot hit a positive real fraction with zero real images")
    if not (0 < target_real_fraction < 1):
        raise SamplerError(f"target_real_fraction out of (0, 1): {target_real_fraction}")
    n_other = n_synth + n_aug
    if n_other == 0:
        raise SamplerError("all images are real; the real fraction is 1 regardless of weights")
    w_real = target_real_fraction / (1.0 - target_real_fraction) * n_other / n_real
    return DomainWeights(w_real=w_real, w_synthetic=1.0, w_augmented=1.0)


def draw_epoch(
    d: Dataset, weights: DomainWeights, epoch_size: int, seed: int
) -> SampleSchedule:
    """Draw ``epoch_size`` training image ids with replacement.

    Each image's probability is proportional to its domain weight.
    Deterministic for a given (dataset, weights, epoch_size, seed).
    """
    train = sorted(d.split_images("train"), key=lambda im: im.image_id)
    if not train:
        raise SamplerError("training split is empty")
    ids = np.array([im.image_id for im in train], dtype=np.int64)
    w = np.array([weights.of(im.domain) for im in train], dtype=np.float64)
    probs = w / w.sum()
    rng = np.random.default_rng(seed)
    picks = rng.choice(ids, size=epoch_size, replace=True, p=probs)
    return SampleSchedule(image_ids=tuple(int(i) for i in picks))


def effective_counts(schedule: SampleSchedule, d: Dataset) -> dict[str, int]:
    """Tally of schedule members by domain."""
    domain_of = {im.image_id: im.domain for im in d.images}
    counts = {"real": 0, "synthetic": 0, "augmented": 0}
    for image_id in schedule.image_ids:
        counts[domain_of[image_id]] += 1
    return counts
