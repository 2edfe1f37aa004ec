"""Convergence-check scheduling for approximated passes.

Checks fire at a geometric cadence over examples consumed (1%, 2%, 4%,
... of the population by default).  When the loss estimate stagnates
between checks the gap is halved instead of doubled, densifying the
checks exactly when convergence is near.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ConfigError


@dataclass
class CheckSchedule:
    population: int
    first_frac: float = 0.01
    growth: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.first_frac <= 1.0:
            raise ConfigError("first check fraction must lie in (0, 1]")
        if self.growth <= 1.0:
            raise ConfigError("check growth ratio must exceed 1")

    @property
    def unit(self) -> int:
        """Smallest spacing between checks, in examples."""
        return max(2, math.ceil(self.first_frac * self.population))

    def tracker(self) -> "CheckTracker":
        return CheckTracker(self)


class CheckTracker:
    def __init__(self, schedule: CheckSchedule):
        self.schedule = schedule
        self.gap = float(schedule.unit)
        self.next_check = float(schedule.unit)
        self.checks_done = 0

    def due(self, examples_seen: int) -> bool:
        return examples_seen >= self.next_check and examples_seen < self.schedule.population

    def advance(self, examples_seen: int, stagnant: bool):
        self.checks_done += 1
        if stagnant:
            self.gap = max(float(self.schedule.unit), self.gap / 2.0)
        else:
            self.gap *= self.schedule.growth
        self.next_check = examples_seen + self.gap
