#!/usr/bin/env python3
"""Print the three curriculum schedules over a training run.

delta ramps the oversampling probability up (original distribution first,
balanced late); alpha_plus / alpha_minus tighten the pseudo-label thresholds
so triplet mining trusts only increasingly confident predictions.
"""

from gnncl.curriculum import CurriculumSchedule

schedule = CurriculumSchedule(mu=1.0, beta_plus=0.6, beta_minus=0.1,
                              total_epochs=2000)

print(f"{'epoch':>6} {'delta':>8} {'alpha_plus':>11} {'alpha_minus':>12}")
for epoch in (0, 200, 500, 1000, 1500, 1800, 2000):
    print(f"{epoch:>6} {schedule.delta(epoch):>8.4f} "
          f"{schedule.alpha_plus(epoch):>11.4f} "
          f"{schedule.alpha_minus(epoch):>12.4f}")

print("\nendpoints: delta(0) = 0 (no oversampling at the start), "
      "delta(L) = mu (full sampling)")
print("alpha_plus climbs to 1 and alpha_minus falls to 0, so pseudo-label")
print("triplet mining dries up as training focuses on the classifier.")

print("\nhalved mu caps the sampling probability:")
half = CurriculumSchedule(mu=0.5, total_epochs=2000)
print(f"  delta(L) with mu=0.5 -> {half.delta(2000):.3f}")
