"""QRWT snapshot weight files.

Layout, all little-endian::

    b"QRWT" | u16 version | u32 len + UTF-8 architecture descriptor
    then, until end of file, per tensor:
    u32 len + UTF-8 name | u8 rank | u32 dims[rank] | f64 data[prod(dims)]
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from .autodiff import Architecture, ModelParams

MAGIC = b"QRWT"
VERSION = 1


class WeightFormatError(ValueError):
    pass


def _put_str(buf: io.BytesIO, text: str) -> None:
    raw = text.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def dumps_weights(params: ModelParams) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    _put_str(buf, params.arch.describe())
    for name, t in params.tensors.items():
        _put_str(buf, name)
        buf.write(struct.pack("<B", t.ndim))
        buf.write(struct.pack(f"<{t.ndim}I", *t.shape))
        buf.write(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightFormatError(f"truncated weight file while reading {what}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def string(self, what: str) -> str:
        (n,) = self.unpack("<I", what)
        try:
            return self.take(n, what).decode("utf-8")
        except UnicodeDecodeError:
            raise WeightFormatError(f"{what} is not valid UTF-8") from None


def loads_weights(data: bytes) -> ModelParams:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise WeightFormatError("bad magic: not a QRWT weight file")
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise WeightFormatError(f"unsupported QRWT version {version}")
    try:
        arch = Architecture.parse(r.string("architecture"))
    except ValueError as exc:
        raise WeightFormatError(f"bad architecture descriptor: {exc}") from None
    tensors = {}
    while r.pos < len(data):
        name = r.string("tensor name")
        (rank,) = r.unpack("<B", f"rank of {name}")
        dims = r.unpack(f"<{rank}I", f"dims of {name}")
        count = int(np.prod(dims, dtype=np.int64))
        raw = r.take(8 * count, f"data of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)
    try:
        return ModelParams(arch, tensors)
    except ValueError as exc:
        raise WeightFormatError(str(exc)) from None


def save_weights(params: ModelParams, path: str | Path) -> None:
    Path(path).write_bytes(dumps_weights(params))


def load_weights(path: str | Path) -> ModelParams:
    return loads_weights(Path(path).read_bytes())
