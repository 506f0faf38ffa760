"""Gaussian noise and Gaussian blur at parameterized severity.

Images are float arrays with trailing (H, W, C) axes and values in [0, 1];
any leading axes are treated as a batch. Noise levels are standard deviations
on the 0-255 byte scale, blur levels are odd kernel sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NOISE = "gaussian_noise"
BLUR = "gaussian_blur"
FAMILIES = (NOISE, BLUR)

DEFAULT_NOISE_LEVELS = tuple(range(10, 101, 10))
DEFAULT_BLUR_LEVELS = tuple(range(1, 16, 2))


def _check_level(family: str, level: float) -> None:
    if family == NOISE:
        if not (level >= 0 and math.isfinite(level)):
            raise ValueError(f"noise sigma must be finite and >= 0, got {level}")
    elif family == BLUR:
        if level != int(level) or level < 1 or int(level) % 2 == 0:
            raise ValueError(f"blur kernel size must be an odd integer >= 1, got {level}")
    else:
        raise ValueError(f"unknown distortion family {family!r}")


@dataclass(frozen=True)
class DistortionSpec:
    family: str
    level: float

    def __post_init__(self):
        _check_level(self.family, self.level)


@dataclass(frozen=True)
class LevelFamily:
    family: str
    levels: tuple

    def __post_init__(self):
        if not self.levels:
            raise ValueError(f"level family {self.family!r} has no levels")
        for level in self.levels:
            _check_level(self.family, level)

    @classmethod
    def noise(cls, levels=DEFAULT_NOISE_LEVELS) -> "LevelFamily":
        return cls(NOISE, tuple(levels))

    @classmethod
    def blur(cls, levels=DEFAULT_BLUR_LEVELS) -> "LevelFamily":
        return cls(BLUR, tuple(int(k) for k in levels))


def blur_sigma(k: int) -> float:
    """Standard deviation used for a k-tap kernel (OpenCV's convention)."""
    return 0.3 * ((k - 1) / 2 - 1) + 0.8


def gaussian_kernel_1d(k: int) -> np.ndarray:
    if k != int(k) or k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be an odd integer >= 1, got {k}")
    k = int(k)
    if k == 1:
        return np.ones(1)
    sigma = blur_sigma(k)
    offsets = np.arange(k) - (k - 1) // 2
    w = np.exp(-(offsets**2) / (2 * sigma**2))
    return w / w.sum()


def _reflect_index(n: int, r: int) -> np.ndarray:
    # half-sample symmetric extension (dcba|abcd|dcba); keeps the blur
    # operator doubly stochastic so the image mean is preserved
    idx = np.mod(np.arange(-r, n + r), 2 * n)
    return np.where(idx >= n, 2 * n - 1 - idx, idx)


def _convolve_axis(x: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    r = (len(w) - 1) // 2
    n = x.shape[axis]
    padded = np.take(x, _reflect_index(n, r), axis=axis)
    # sum weighted offsets from the centre tap: equal to sum(w * x) since
    # sum(w) == 1, and returns a constant signal bit for bit
    acc = np.zeros_like(x)
    for j, wj in enumerate(w):
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(j, j + n)
        acc += wj * (padded[tuple(sl)] - x)
    return x + acc


def apply_blur(image: np.ndarray, k: int) -> np.ndarray:
    """Separable Gaussian blur (horizontal pass, then vertical) with mirrored borders."""
    w = gaussian_kernel_1d(k)
    image = np.asarray(image, dtype=np.float64)
    if len(w) == 1:
        return image.copy()
    if image.ndim < 3:
        raise ValueError(f"image must have trailing H, W, C axes; got shape {image.shape}")
    out = _convolve_axis(image, w, axis=image.ndim - 2)
    out = _convolve_axis(out, w, axis=image.ndim - 3)
    return np.clip(out, 0.0, 1.0)


def apply_noise(image: np.ndarray, sigma255: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. N(0, (sigma255/255)^2) noise per pixel and channel, then clip to [0, 1]."""
    if not sigma255 >= 0:
        raise ValueError(f"noise sigma must be >= 0, got {sigma255}")
    image = np.asarray(image, dtype=np.float64)
    if sigma255 == 0:
        return image.copy()
    noise = rng.normal(0.0, sigma255 / 255.0, size=image.shape)
    return np.clip(image + noise, 0.0, 1.0)


def sample_level(family: LevelFamily, rng: np.random.Generator) -> DistortionSpec:
    if not family.levels:
        raise ValueError("cannot sample from an empty level family")
    return DistortionSpec(family.family, family.levels[int(rng.integers(len(family.levels)))])


def distort(image: np.ndarray, spec: DistortionSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.family == NOISE:
        return apply_noise(image, spec.level, rng)
    return apply_blur(image, int(spec.level))
