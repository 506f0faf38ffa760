"""Datasets: synthetic shapes, QRDS binary files, PPM folders, stratified splits."""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import RngStream


class DataFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # N, H, W, C float64 in [0, 1]
    labels: np.ndarray  # N int64
    class_names: list[str]

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ValueError(f"images must be N x H x W x C, got shape {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("label outside the class range")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise ValueError("pixel values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def one_hot(self) -> np.ndarray:
        return np.eye(self.num_classes)[self.labels]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.images[idx], self.labels[idx], list(self.class_names))


# --------------------------------------------------------------------------
# synthetic shapes

SHAPES = ("disk", "square", "cross", "stripes")


@dataclass(frozen=True)
class SynthConfig:
    classes: tuple[str, ...] = SHAPES
    per_class: int = 625
    size: int = 32
    channels: int = 3
    shift: float = 0.12  # max centre offset, fraction of size
    scale: tuple[float, float] = (0.24, 0.36)  # half-extent, fraction of size
    rotation: float = 15.0  # max rotation, degrees
    background_noise: float = 0.0
    contrast: float = 0.4  # min mean-intensity gap between shape and background
    seed: int = 0

    def __post_init__(self):
        if not self.classes:
            raise ValueError("need at least one class")
        for name in self.classes:
            if name not in SHAPES:
                raise ValueError(f"unknown shape class {name!r}; choose from {SHAPES}")
        if self.per_class < 1:
            raise ValueError("per_class must be >= 1")
        if self.size < 8:
            raise ValueError("image size must be >= 8")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError("contrast must lie in [0, 1]")
        if self.background_noise < 0:
            raise ValueError("background_noise must be >= 0")


def _shape_mask(kind: str, u: np.ndarray, v: np.ndarray, r: float, period: float) -> np.ndarray:
    """Anti-aliased coverage in [0, 1] from a signed distance in pixels."""
    if kind == "disk":
        d = r - np.hypot(u, v)
    elif kind == "square":
        d = 0.85 * r - np.maximum(np.abs(u), np.abs(v))
    elif kind == "cross":
        arm = 0.3 * r
        bar1 = np.minimum(arm - np.abs(u), r - np.abs(v))
        bar2 = np.minimum(arm - np.abs(v), r - np.abs(u))
        d = np.maximum(bar1, bar2)
    else:  # stripes: diagonal bands clipped to a square patch
        patch = 0.85 * r - np.maximum(np.abs(u), np.abs(v))
        phase = np.mod((u + v) / math.sqrt(2), period) - period / 2
        band = period / 4 - np.abs(phase)
        d = np.minimum(patch, band)
    return np.clip(0.5 + d, 0.0, 1.0)


def _render(kind: str, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    s = cfg.size
    cy, cx = (s - 1) / 2 + rng.uniform(-cfg.shift, cfg.shift, size=2) * s
    r = rng.uniform(*cfg.scale) * s
    theta = math.radians(rng.uniform(-cfg.rotation, cfg.rotation))
    bg = rng.uniform(0.0, 1.0, size=cfg.channels)
    fg = rng.uniform(0.0, 1.0, size=cfg.channels)
    # keep a visible luminance gap between figure and ground
    gap = fg.mean() - bg.mean()
    if abs(gap) < cfg.contrast:
        push = (cfg.contrast - abs(gap)) * (1 if gap >= 0 else -1)
        fg = np.clip(fg + push / 2, 0, 1)
        bg = np.clip(bg - push / 2, 0, 1)
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    u = math.cos(theta) * dx + math.sin(theta) * dy
    v = -math.sin(theta) * dx + math.cos(theta) * dy
    mask = _shape_mask(kind, u, v, r, period=max(3.0, s / 8))[..., None]
    img = mask * fg + (1 - mask) * bg
    if cfg.background_noise > 0:
        img = img + rng.normal(0.0, cfg.background_noise, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic(cfg: SynthConfig = SynthConfig()) -> Dataset:
    """Class-balanced shape images; sample i of class c draws from its own stream."""
    root = RngStream.from_seed(cfg.seed).child("synthetic")
    images, labels = [], []
    for c, kind in enumerate(cfg.classes):
        for i in range(cfg.per_class):
            images.append(_render(kind, cfg, root.child(c, i).generator()))
            labels.append(c)
    # interleave classes so file order carries no class blocks
    order = np.argsort(np.arange(len(labels)) % cfg.per_class * len(cfg.classes) + np.array(labels), kind="stable")
    return Dataset(np.stack(images)[order], np.array(labels)[order], list(cfg.classes))


# --------------------------------------------------------------------------
# QRDS binary format
#
# b"QRDS" | u16 version=1 | u32 N | u16 H | u16 W | u8 C | u16 K
# K x (u32 len + UTF-8 class name)
# N x (u16 label | H*W*C bytes, row-major, channel-interleaved); little-endian

QRDS_MAGIC = b"QRDS"
QRDS_VERSION = 1
_QRDS_HEADER = struct.Struct("<4sHIHHBH")


def quantize(images: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(images) * 255.0).astype(np.uint8)


def dumps_qrds(ds: Dataset) -> bytes:
    n, h, w, c = ds.images.shape
    if max(h, w) > 0xFFFF or c > 0xFF or ds.num_classes > 0xFFFF or n > 0xFFFFFFFF:
        raise DataFormatError("dimension overflow: dataset too large for the QRDS header")
    buf = io.BytesIO()
    buf.write(_QRDS_HEADER.pack(QRDS_MAGIC, QRDS_VERSION, n, h, w, c, ds.num_classes))
    for name in ds.class_names:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    pixels = quantize(ds.images).reshape(n, -1)
    record = np.zeros((n, 2 + h * w * c), dtype=np.uint8)
    record[:, :2] = ds.labels.astype("<u2").view(np.uint8).reshape(n, 2)
    record[:, 2:] = pixels
    buf.write(record.tobytes())
    return buf.getvalue()


def loads_qrds(data: bytes) -> Dataset:
    if len(data) < 4 or data[:4] != QRDS_MAGIC:
        raise DataFormatError("bad magic: not a QRDS dataset file")
    if len(data) < _QRDS_HEADER.size:
        raise DataFormatError("truncated payload: header incomplete")
    _, version, n, h, w, c, k = _QRDS_HEADER.unpack_from(data)
    if version != QRDS_VERSION:
        raise DataFormatError(f"unsupported QRDS version {version}")
    if min(h, w, c) == 0 and n:
        raise DataFormatError("dimension overflow: zero-sized image dimensions")
    pos = _QRDS_HEADER.size
    names = []
    for _ in range(k):
        if pos + 4 > len(data):
            raise DataFormatError("truncated payload: class names incomplete")
        (ln,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + ln > len(data):
            raise DataFormatError("truncated payload: class names incomplete")
        names.append(data[pos : pos + ln].decode("utf-8"))
        pos += ln
    rec = 2 + h * w * c
    need = n * rec
    if len(data) - pos < need:
        raise DataFormatError(f"truncated payload: expected {need} record bytes, found {len(data) - pos}")
    if len(data) - pos > need:
        raise DataFormatError(f"trailing bytes after {n} records")
    records = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(n, rec)
    labels = records[:, :2].copy().view("<u2").reshape(n).astype(np.int64)
    if n and labels.max() >= k:
        raise DataFormatError(f"label {labels.max()} out of range for {k} classes")
    images = records[:, 2:].reshape(n, h, w, c).astype(np.float64) / 255.0
    return Dataset(images, labels, names)


def save_qrds(ds: Dataset, path: str | Path) -> None:
    Path(path).write_bytes(dumps_qrds(ds))


def load_qrds(path: str | Path) -> Dataset:
    return loads_qrds(Path(path).read_bytes())


# --------------------------------------------------------------------------
# PPM folders


def _ppm_tokens(data: bytes, count: int, path: Path) -> tuple[list[int], int]:
    tokens, pos = [], 2
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise DataFormatError(f"{path}: malformed PPM header")
        tokens.append(int(data[start:pos]))
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_ppm(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if data[:2] != b"P6":
        raise DataFormatError(f"{path}: not a binary P6 PPM file")
    (w, h, maxval), pos = _ppm_tokens(data, 3, path)
    if not 0 < maxval < 65536 or w < 1 or h < 1:
        raise DataFormatError(f"{path}: bad PPM dimensions or maxval")
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    need = w * h * 3 * dtype.itemsize
    if len(data) - pos < need:
        raise DataFormatError(f"{path}: truncated PPM raster")
    raster = np.frombuffer(data, dtype=dtype, count=w * h * 3, offset=pos)
    return np.clip(raster.reshape(h, w, 3).astype(np.float64) / maxval, 0.0, 1.0)


def load_ppm_dir(root: str | Path) -> Dataset:
    """root/<class>/<name>.ppm; class index is the rank of the sorted directory name."""
    root = Path(root)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataFormatError(f"{root}: no class subdirectories")
    images, labels, shape, first = [], [], None, None
    for label, d in enumerate(class_dirs):
        files = sorted(d.glob("*.ppm"))
        if not files:
            raise DataFormatError(f"{d}: empty class directory")
        for f in files:
            img = read_ppm(f)
            if shape is None:
                shape, first = img.shape, f
            elif img.shape != shape:
                raise DataFormatError(f"{f}: mixed dimensions {img.shape[1]}x{img.shape[0]}, expected {shape[1]}x{shape[0]} as in {first}")
            images.append(img)
            labels.append(label)
    return Dataset(np.stack(images), np.array(labels), [d.name for d in class_dirs])


# --------------------------------------------------------------------------
# splitting


def split(ds: Dataset, test_fraction: float = 0.2, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified train/test partition; both parts keep the original sample order."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    stream = RngStream.from_seed(seed).child("split")
    test_mask = np.zeros(len(ds), dtype=bool)
    for c in range(ds.num_classes):
        idx = np.flatnonzero(ds.labels == c)
        if len(idx) == 0:
            continue
        if len(idx) < 2:
            raise ValueError(f"class {ds.class_names[c]!r} has fewer than 2 samples; cannot split")
        n_test = min(max(int(round(len(idx) * test_fraction)), 1), len(idx) - 1)
        picked = stream.child(c).generator().permutation(idx)[:n_test]
        test_mask[picked] = True
    return ds.subset(np.flatnonzero(~test_mask)), ds.subset(np.flatnonzero(test_mask))
