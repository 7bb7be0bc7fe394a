"""Counter-based seeding: one independent stream per (seed, stream, index)."""

from __future__ import annotations

import zlib

import numpy as np


def stream_id(name: str) -> int:
    return zlib.crc32(name.encode())


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the given key path; independent of how work is scheduled."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def draw_rngs(seed: int, stream: str, n: int, offset: int = 0) -> list[np.random.Generator]:
    sid = stream_id(stream)
    return [derive_rng(seed, sid, offset + i) for i in range(n)]
