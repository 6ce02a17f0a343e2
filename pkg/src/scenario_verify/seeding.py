"""Reproducible random streams.

A stream is identified by ``(master, stream)``. The generator for it is
numpy's PCG64 seeded with ``SeedSequence(master, spawn_key=(stream,))``;
sub-streams append further keys to the spawn key. This map is part of the
repository contract: acceptance tests pin seeds and expect the same draws.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

U64_MAX = 2**64 - 1

# Disjoint stream namespaces under one master seed.
FIT_NAMESPACE = 0
HOLDOUT_NAMESPACE = 2**62
ORACLE_STREAM = 2**63


@dataclass(frozen=True)
class RngSeed:
    master: int
    stream: int = 0

    def __post_init__(self):
        for name in ("master", "stream"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError(f"{name} must be an integer, got {value!r}")
            if not 0 <= int(value) <= U64_MAX:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")

    def generator(self, *subkeys: int) -> np.random.Generator:
        """Generator for this stream, or for a sub-stream if ``subkeys`` given."""
        seq = np.random.SeedSequence(int(self.master), spawn_key=(int(self.stream), *subkeys))
        return np.random.Generator(np.random.PCG64(seq))

    def to_dict(self) -> dict:
        return {"master": int(self.master), "stream": int(self.stream)}

    @classmethod
    def from_dict(cls, d: dict) -> "RngSeed":
        return cls(int(d["master"]), int(d.get("stream", 0)))


def derive_master(master: int, *keys: int) -> int:
    """A new 64-bit master seed, a pure function of ``master`` and ``keys``."""
    words = np.random.SeedSequence(int(master), spawn_key=tuple(keys)).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)
