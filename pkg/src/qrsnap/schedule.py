"""Cyclic cosine-annealing learning rate with snapshot points."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distortion import LevelFamily

PRISTINE = "pristine"


@dataclass(frozen=True)
class SchedulePlan:
    alpha0: float
    total_iters: int
    cycles: int

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError(f"alpha0 must be > 0, got {self.alpha0}")
        if self.cycles < 1 or self.total_iters < self.cycles:
            raise ValueError(f"need total_iters >= cycles >= 1, got T={self.total_iters}, M={self.cycles}")
        if self.total_iters % self.cycles:
            raise ValueError(f"total_iters {self.total_iters} is not divisible by cycle count {self.cycles}")

    @property
    def cycle_length(self) -> int:
        return self.total_iters // self.cycles


def lr_at(t: int, plan: SchedulePlan) -> float:
    """alpha(t) = alpha0/2 * (cos(pi * mod(t-1, T/M) / (T/M)) + 1), t is 1-based."""
    if not 1 <= t <= plan.total_iters:
        raise ValueError(f"iteration {t} outside 1..{plan.total_iters}")
    period = plan.cycle_length
    return plan.alpha0 / 2 * (math.cos(math.pi * ((t - 1) % period) / period) + 1)


def snapshot_points(plan: SchedulePlan) -> list[int]:
    return [m * plan.cycle_length for m in range(1, plan.cycles + 1)]


@dataclass(frozen=True)
class Cycle:
    family: LevelFamily | None  # None trains on pristine images
    epochs: int
    alpha0: float

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"a cycle needs at least one epoch, got {self.epochs}")
        if self.alpha0 < 0:
            raise ValueError(f"alpha0 must be >= 0, got {self.alpha0}")

    @property
    def specialty(self) -> str:
        return PRISTINE if self.family is None else self.family.family


def make_cycle_plan(families: list[LevelFamily | None], epochs_per_cycle: int = 32, alpha0: float = 0.05) -> list[Cycle]:
    """One cycle per family, in order. ``None`` stands for pristine training."""
    if not families:
        raise ValueError("a cycle plan needs at least one family")
    if epochs_per_cycle < 1:
        raise ValueError(f"epochs_per_cycle must be >= 1, got {epochs_per_cycle}")
    return [Cycle(f, epochs_per_cycle, alpha0) for f in families]
