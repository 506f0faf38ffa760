"""Splittable, counter-based random streams.

Every random draw in the package comes from a generator produced by an
:class:`RngStream`. A stream is an immutable key path; children are derived by
appending labels, so a (purpose, index) pair always maps to the same Philox
key no matter in which order streams are created.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def _label_to_int(label: int | str) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"stream labels must be non-negative, got {label}")
        return int(label)
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    key: tuple[int, ...]

    @classmethod
    def from_seed(cls, seed: int) -> "RngStream":
        return cls((_label_to_int(seed),))

    def child(self, *labels: int | str) -> "RngStream":
        return RngStream(self.key + tuple(_label_to_int(x) for x in labels))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(self.key))))
