"""RQMixup: convex mixing of pristine images with distorted copies.

For a batch of clean images ``x_i`` with labels ``y_i`` a distorted copy
``x_n`` is built at a single randomly drawn distortion level and the two are
blended::

    x_f = lam * x_i + (1 - lam) * x_n
    y_f = lam * y_i + (1 - lam) * y_n
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distortion import LevelFamily, distort, sample_level

SAME_SAMPLE = "same"
SHUFFLED = "shuffled"
PER_BATCH = "batch"
PER_SAMPLE = "sample"


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class MixPolicy:
    lambda_law: str = "uniform"  # fixed | uniform | beta
    lambda_param: float = 0.0  # lambda for fixed, alpha for beta
    pairing: str = SAME_SAMPLE
    draw_scope: str = PER_BATCH

    def __post_init__(self):
        if self.lambda_law == "fixed":
            if not 0.0 <= self.lambda_param <= 1.0:
                raise ValueError(f"fixed lambda must lie in [0, 1], got {self.lambda_param}")
        elif self.lambda_law == "beta":
            if not self.lambda_param > 0:
                raise ValueError(f"beta parameter must be > 0, got {self.lambda_param}")
        elif self.lambda_law != "uniform":
            raise ValueError(f"unknown lambda law {self.lambda_law!r}")
        if self.pairing not in (SAME_SAMPLE, SHUFFLED):
            raise ValueError(f"unknown pairing {self.pairing!r}")
        if self.draw_scope not in (PER_BATCH, PER_SAMPLE):
            raise ValueError(f"unknown draw scope {self.draw_scope!r}")

    @classmethod
    def parse(cls, law: str, pairing: str = SAME_SAMPLE, scope: str = PER_BATCH) -> "MixPolicy":
        """Build from config text; ``law`` is ``uniform``, ``fixed:0.3`` or ``beta:0.4``."""
        name, _, arg = law.partition(":")
        if name == "uniform":
            if arg:
                raise ValueError("uniform lambda law takes no parameter")
            return cls("uniform", 0.0, pairing, scope)
        try:
            value = float(arg)
        except ValueError:
            raise ValueError(f"lambda law {law!r} needs a numeric parameter") from None
        return cls(name, value, pairing, scope)

    def describe(self) -> str:
        return "uniform" if self.lambda_law == "uniform" else f"{self.lambda_law}:{self.lambda_param!r}"

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        size = 1 if self.draw_scope == PER_BATCH else n
        if self.lambda_law == "fixed":
            lam = np.full(size, self.lambda_param)
        elif self.lambda_law == "uniform":
            lam = rng.uniform(0.0, 1.0, size=size)
        else:
            lam = rng.beta(self.lambda_param, self.lambda_param, size=size)
        return np.broadcast_to(lam, (n,)).copy()


def _blend(a: np.ndarray, b: np.ndarray, lam) -> np.ndarray:
    out = lam * a + (1.0 - lam) * b
    # rounding can leave the [min, max] hull by an ulp
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def mix_pair(clean: Sample, noisy: Sample, lam: float) -> Sample:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if clean.x.shape != noisy.x.shape:
        raise ValueError(f"image shapes differ: {clean.x.shape} vs {noisy.x.shape}")
    if clean.y.shape != noisy.y.shape:
        raise ValueError(f"label shapes differ: {clean.y.shape} vs {noisy.y.shape}")
    return Sample(_blend(clean.x, noisy.x, lam), _blend(clean.y, noisy.y, lam))


def mix_batch(
    images: np.ndarray,
    labels: np.ndarray,
    family: LevelFamily,
    policy: MixPolicy,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Mix an (N, H, W, C) batch with a distorted copy of itself.

    ``labels`` are (N, K) distributions. Draw order from ``rng`` is fixed:
    distortion level, then lambda(s), then the pairing permutation, then the
    distortion's own randomness. Returns mixed images, mixed labels and the
    distortion level used.
    """
    n = len(images)
    if n == 0:
        raise ValueError("cannot mix an empty batch")
    if len(labels) != n:
        raise ValueError(f"{n} images but {len(labels)} labels")
    spec = sample_level(family, rng)
    lam = policy.draw(rng, n)
    perm = rng.permutation(n) if policy.pairing == SHUFFLED else None
    noisy = distort(images, spec, rng)
    noisy_labels = labels
    if perm is not None:
        noisy, noisy_labels = noisy[perm], labels[perm]
    lam_x = lam.reshape((n,) + (1,) * (images.ndim - 1))
    mixed = _blend(images, noisy, lam_x)
    if perm is None:
        mixed_labels = labels.copy()  # lam*y + (1-lam)*y == y
    else:
        mixed_labels = _blend(labels, noisy_labels, lam[:, None])
    return mixed, mixed_labels, spec.level
