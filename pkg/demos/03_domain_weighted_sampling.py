#!/usr/bin/env python3
"""Domain-aware epoch sampling.

With 199 real vs 3582 synthetic training images, uniform sampling shows a
real image about 5% of the time. Solving for weights that put the expected
real fraction at 0.5 and drawing a large epoch demonstrates the reweighting;
scaling all weights by a constant changes nothing.
"""

from seadet.fixtures import paper_shape_dataset
from seadet.sampler import (
    DomainWeights,
    draw_epoch,
    effective_counts,
    weights_for_target_ratio,
)

dataset = paper_shape_dataset()  # reference split sizes, in memory
train_counts = {"real": 199, "synthetic": 3582, "augmented": 5212}
n = 100_000

print("== uniform sampling ==")
uniform = draw_epoch(dataset, DomainWeights(1, 1, 1), n, seed=1)
counts = effective_counts(uniform, dataset)
for domain, c in counts.items():
    print(f"  {domain:10s} {c / n:7.4f} (population {train_counts[domain] / 8993:.4f})")

print("\n== weighted toward real fraction 0.5 ==")
weights = weights_for_target_ratio(train_counts, target_real_fraction=0.5)
print(f"solved weights: real={weights.w_real:.3f} "
      f"synthetic={weights.w_synthetic:.3f} augmented={weights.w_augmented:.3f}")
weighted = draw_epoch(dataset, weights, n, seed=1)
counts = effective_counts(weighted, dataset)
for domain, c in counts.items():
    print(f"  {domain:10s} {c / n:7.4f}")

print("\n== only ratios matter ==")
scaled = DomainWeights(weights.w_real * 10, weights.w_synthetic * 10, weights.w_augmented * 10)
print("x10 weights give the identical schedule:",
      draw_epoch(dataset, scaled, n, seed=1) == weighted)
