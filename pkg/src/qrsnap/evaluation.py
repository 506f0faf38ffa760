"""Top-k accuracy under distortion and paired distortion sweeps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .distortion import BLUR, DEFAULT_BLUR_LEVELS, DEFAULT_NOISE_LEVELS, NOISE, DistortionSpec, distort
from .ensemble import top_k
from .rng import RngStream

CLEAN = "clean"
CSV_HEADER = "model,family,level,top1,topk,n"


@dataclass(frozen=True)
class SweepGrid:
    noise_levels: tuple[int, ...] = DEFAULT_NOISE_LEVELS
    blur_levels: tuple[int, ...] = DEFAULT_BLUR_LEVELS
    include_clean: bool = True

    def __post_init__(self):
        for level in self.noise_levels:
            DistortionSpec(NOISE, level)
        for level in self.blur_levels:
            DistortionSpec(BLUR, level)

    def points(self) -> list[DistortionSpec | None]:
        pts: list[DistortionSpec | None] = [None] if self.include_clean else []
        pts += [DistortionSpec(NOISE, s) for s in self.noise_levels]
        pts += [DistortionSpec(BLUR, k) for k in self.blur_levels]
        return pts


@dataclass(frozen=True)
class SweepRow:
    model: str
    family: str
    level: float
    top1: float
    topk: float
    n: int


@dataclass
class SweepReport:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            if r.level != int(r.level):
                raise ValueError(f"level {r.level} is not an integer; the CSV format stores integer levels")
            lines.append(f"{r.model},{r.family},{int(r.level)},{r.top1:.6f},{r.topk:.6f},{r.n}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_csv())


def distort_test_set(images: np.ndarray, spec: DistortionSpec | None, seed: int) -> np.ndarray:
    """Distort each image once from a stream keyed by (seed, family, level, index)."""
    if spec is None:
        return images
    if spec.family == BLUR:
        return distort(images, spec, None)  # deterministic, batch at once
    base = RngStream.from_seed(seed).child("eval", spec.family, repr(float(spec.level)))
    return np.stack([distort(img, spec, base.child(i).generator()) for i, img in enumerate(images)])


def _accuracies(probs: np.ndarray, labels: np.ndarray, k: int) -> tuple[float, float]:
    ranked = top_k(probs, k)
    top1 = float(np.mean(ranked[:, 0] == labels))
    topk = float(np.mean(np.any(ranked == labels[:, None], axis=1)))
    return top1, topk


def evaluate(model, test: Dataset, spec: DistortionSpec | None, k: int = 3, seed: int = 0) -> tuple[float, float]:
    """(top1, topk) of ``model.predict_batch`` on the test set under ``spec`` (None = clean)."""
    if len(test) == 0:
        raise ValueError("test set is empty")
    images = distort_test_set(test.images, spec, seed)
    return _accuracies(model.predict_batch(images), test.labels, k)


def sweep(models: list[tuple[str, object]], test: Dataset, grid: SweepGrid = SweepGrid(), k: int = 3, seed: int = 0) -> SweepReport:
    """Evaluate every model at every grid point on the same distorted images."""
    if not models:
        raise ValueError("sweep needs at least one model")
    if len(test) == 0:
        raise ValueError("test set is empty")
    results: dict[tuple[int, int], SweepRow] = {}
    points = grid.points()
    for p, spec in enumerate(points):
        images = distort_test_set(test.images, spec, seed)
        for m, (tag, model) in enumerate(models):
            top1, topk = _accuracies(model.predict_batch(images), test.labels, k)
            family, level = (CLEAN, 0) if spec is None else (spec.family, spec.level)
            results[m, p] = SweepRow(tag, family, level, top1, topk, len(test))
    rows = [results[m, p] for m in range(len(models)) for p in range(len(points))]
    return SweepReport(rows, {"seed": seed, "k": k})


def read_sweep_csv(text: str) -> list[SweepRow]:
    """Parse a sweep CSV strictly; errors carry the 1-based line number."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"line 1: expected header {CSV_HEADER!r}")
    rows = []
    for lineno, fields in enumerate(csv.reader(io.StringIO("\n".join(lines[1:]))), 2):
        try:
            if len(fields) != 6:
                raise ValueError(f"expected 6 fields, got {len(fields)}")
            model, family, level, top1, topk, n = fields
            row = SweepRow(model, family, int(level), float(top1), float(topk), int(n))
            if not (0 <= row.top1 <= 1 and 0 <= row.topk <= 1):
                raise ValueError("accuracy outside [0, 1]")
            if family not in (CLEAN, NOISE, BLUR):
                raise ValueError(f"unknown family {family!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        rows.append(row)
    if not rows:
        raise ValueError("line 2: no data rows after header")
    return rows
