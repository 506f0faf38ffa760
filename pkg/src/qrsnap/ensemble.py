"""Snapshot ensembles: averaged softmax scores and manifest files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import ModelParams, model_forward, softmax
from .weights import load_weights, save_weights


@dataclass
class Snapshot:
    params: ModelParams
    specialty: str
    cycle_index: int
    final_train_loss: float = float("nan")

    def __post_init__(self):
        if self.cycle_index < 1:
            raise ValueError(f"cycle_index must be >= 1, got {self.cycle_index}")

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        """Softmax scores for an (N, H, W, C) batch."""
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 4:
            raise ValueError(f"expected an N x H x W x C batch, got shape {images.shape}")
        logits, _ = model_forward(self.params, images.transpose(0, 3, 1, 2), record=False)
        return softmax(logits)


class EnsembleModel:
    def __init__(self, snapshots: list[Snapshot]):
        if not snapshots:
            raise ValueError("an ensemble needs at least one snapshot")
        arch = snapshots[0].params.arch
        if any(s.params.arch != arch for s in snapshots):
            raise ValueError("all snapshots in an ensemble must share one architecture")
        self.snapshots = list(snapshots)
        self.arch = arch

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def specialties(self) -> list[str]:
        return [s.specialty for s in self.snapshots]

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        # sum in cycle order so member order never changes the bits
        members = sorted(self.snapshots, key=lambda s: s.cycle_index)
        total = members[0].predict_batch(images)
        for s in members[1:]:
            total = total + s.predict_batch(images)
        return total / len(members)


def predict_single(snapshot: Snapshot, image: np.ndarray) -> np.ndarray:
    return snapshot.predict_batch(np.asarray(image)[None])[0]


def predict_ensemble(model: EnsembleModel, image: np.ndarray) -> np.ndarray:
    return model.predict_batch(np.asarray(image)[None])[0]


def top_k(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, descending; ties go to the lower index."""
    dist = np.asarray(dist)
    if not 1 <= k <= dist.shape[-1]:
        raise ValueError(f"k must lie in 1..{dist.shape[-1]}, got {k}")
    return np.argsort(-dist, axis=-1, kind="stable")[..., :k]


# --------------------------------------------------------------------------
# manifests: "<cycle_index> <specialty> <path>" per line, '#' comments,
# paths relative to the manifest's directory


def save_ensemble(model: EnsembleModel, out_dir: str | Path, name: str) -> Path:
    out_dir = Path(out_dir)
    lines = [f"# {name}: {len(model)} snapshot(s)"]
    for s in model.snapshots:
        fname = f"{name}-cycle{s.cycle_index}.qrwt"
        save_weights(s.params, out_dir / fname)
        lines.append(f"{s.cycle_index} {s.specialty} {fname}")
    manifest = out_dir / f"{name}.manifest"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def read_manifest(path: str | Path) -> list[tuple[int, str, Path]]:
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(maxsplit=2)
        if len(parts) != 3 or not parts[0].isdigit():
            raise ValueError(f"{path}:{lineno}: expected '<cycle_index> <specialty> <path>'")
        entries.append((int(parts[0]), parts[1], path.parent / parts[2]))
    if not entries:
        raise ValueError(f"{path}: manifest lists no snapshots")
    return entries


def load_ensemble(manifest: str | Path) -> EnsembleModel:
    return EnsembleModel([Snapshot(load_weights(p), spec, idx) for idx, spec, p in read_manifest(manifest)])
