"""Closed-form cosine curriculum schedulers.

Three schedules drive training, all functions of the epoch index l in
[0, total_epochs]:

* ``delta``      - oversampling probability, ramping 0 -> mu,
* ``alpha_plus`` - pseudo-label threshold for anchors/positives, 1-beta+ -> 1,
* ``alpha_minus`` - pseudo-label threshold for negatives, beta- -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CurriculumSchedule:
    mu: float = 1.0
    beta_plus: float = 0.6
    beta_minus: float = 0.1
    total_epochs: int = 2000

    def __post_init__(self):
        for name in ("mu", "beta_plus", "beta_minus"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be >= 1")

    def _cos(self, epoch):
        if not 0 <= epoch <= self.total_epochs:
            raise ValueError(f"epoch {epoch} outside [0, {self.total_epochs}]")
        return math.cos((epoch / self.total_epochs) * (math.pi / 2.0))

    def delta(self, epoch):
        """Sampling probability mu * (1 - cos((l/L) * pi/2))."""
        return self.mu * (1.0 - self._cos(epoch))

    def alpha_plus(self, epoch):
        """Positive/anchor threshold 1 - beta_plus * cos((l/L) * pi/2)."""
        return 1.0 - self.beta_plus * self._cos(epoch)

    def alpha_minus(self, epoch):
        """Negative threshold beta_minus * cos((l/L) * pi/2)."""
        return self.beta_minus * self._cos(epoch)
