"""G-Specialist training: one run, one cycle per distortion family, a snapshot per cycle."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Architecture, ModelParams, backward, default_architecture, init_params, loss_softmax_ce, model_forward, sgd_step
from .data import Dataset
from .distortion import LevelFamily
from .ensemble import EnsembleModel, Snapshot
from .mixup import MixPolicy, mix_batch
from .rng import RngStream
from .schedule import Cycle, SchedulePlan, lr_at, make_cycle_plan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    cycles: tuple[Cycle, ...] = field(
        default_factory=lambda: tuple(make_cycle_plan([LevelFamily.noise(), LevelFamily.blur()], 32, 0.05))
    )
    batch_size: int = 32
    momentum: float = 0.0
    seed: int = 0
    policy: MixPolicy = MixPolicy()
    arch: Architecture | None = None  # None: default CNN sized to the dataset

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if not self.cycles:
            raise ValueError("the cycle plan is empty")
        if len({c.epochs for c in self.cycles}) != 1:
            raise ValueError("all cycles must share one epoch count so T is divisible by M")

    def pristine(self) -> "TrainConfig":
        """Same plan and schedule, every cycle on pristine images."""
        return replace(self, cycles=tuple(replace(c, family=None) for c in self.cycles))


@dataclass(frozen=True)
class LogRow:
    iteration: int
    cycle: int
    lr: float
    loss: float


def batches_per_epoch(n: int, batch_size: int) -> int:
    return math.ceil(n / batch_size)


def _check_fit(arch: Architecture, train_set: Dataset) -> None:
    _, h, w, c = train_set.images.shape
    if tuple(arch.input_shape) != (c, h, w):
        raise ValueError(f"architecture input {arch.input_shape} does not match images {(c, h, w)}")
    if arch.num_classes != train_set.num_classes:
        raise ValueError(f"architecture has {arch.num_classes} outputs for {train_set.num_classes} classes")


class Trainer:
    """Owns the parameters, optimizer state and iteration counter of one run."""

    def __init__(self, params: ModelParams, cfg: TrainConfig, stream: RngStream):
        self.params = params
        self.cfg = cfg
        self.stream = stream
        self.velocity: dict[str, np.ndarray] = {}
        self.iteration = 0
        self.epoch = 0
        self.log: list[LogRow] = []

    def run_cycle(self, cycle: Cycle, cycle_index: int, train_set: Dataset) -> Snapshot:
        n = len(train_set)
        if n == 0:
            raise ValueError("training set is empty")
        bs = self.cfg.batch_size
        length = cycle.epochs * batches_per_epoch(n, bs)
        plan = SchedulePlan(cycle.alpha0, length, 1) if cycle.alpha0 > 0 else None
        targets = train_set.one_hot()
        local = 0
        last_epoch_losses = []
        for _ in range(cycle.epochs):
            order = self.stream.child("shuffle", self.epoch).generator().permutation(n)
            self.epoch += 1
            last_epoch_losses = []
            for start in range(0, n, bs):
                idx = order[start : start + bs]
                x, y = train_set.images[idx], targets[idx]
                local += 1
                self.iteration += 1
                if cycle.family is not None:
                    rng = self.stream.child("augment", self.iteration).generator()
                    x, y, _ = mix_batch(x, y, cycle.family, self.cfg.policy, rng)
                lr = lr_at(local, plan) if plan is not None else 0.0
                logits, tape = model_forward(self.params, x.transpose(0, 3, 1, 2))
                loss = loss_softmax_ce(logits, y, tape)
                grads = backward(tape, self.params)
                sgd_step(self.params, grads, lr, self.cfg.momentum, self.velocity)
                self.log.append(LogRow(self.iteration, cycle_index, lr, loss))
                last_epoch_losses.append(loss)
        final = float(np.mean(last_epoch_losses))
        log.info("cycle %d (%s) done after %d iterations, loss %.4f", cycle_index, cycle.specialty, self.iteration, final)
        return Snapshot(self.params.copy(), cycle.specialty, cycle_index, final)


def train(train_set: Dataset, cfg: TrainConfig, log_rows: list[LogRow] | None = None) -> EnsembleModel:
    arch = cfg.arch or default_architecture(train_set.images.shape[3], train_set.images.shape[1], train_set.num_classes)
    if train_set.images.shape[1] != train_set.images.shape[2] and cfg.arch is None:
        raise ValueError("default architecture needs square images; pass an explicit architecture")
    _check_fit(arch, train_set)
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    stream = RngStream.from_seed(cfg.seed)
    params = init_params(arch, stream.child("init").generator())
    trainer = Trainer(params, cfg, stream)
    snapshots = [trainer.run_cycle(c, m, train_set) for m, c in enumerate(cfg.cycles, 1)]
    if log_rows is not None:
        log_rows.extend(trainer.log)
    return EnsembleModel(snapshots)


def train_gspecialist(train_set: Dataset, cfg: TrainConfig, log_rows: list[LogRow] | None = None) -> EnsembleModel:
    return train(train_set, cfg, log_rows)


def train_baseline(train_set: Dataset, cfg: TrainConfig, log_rows: list[LogRow] | None = None) -> EnsembleModel:
    return train(train_set, cfg.pristine(), log_rows)
