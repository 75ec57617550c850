"""Keyed random streams.

Every source of randomness in the package is derived from a tuple of
integers (a *stream key*). Equal keys give bit-identical streams, so runs
can be reproduced from their coordinates alone.
"""

from __future__ import annotations

import zlib
from typing import Tuple, Union

import numpy as np

StreamKey = Tuple[int, ...]


def tag(name: str) -> int:
    """Stable integer code for a phase/label string."""
    return zlib.crc32(name.encode("utf-8"))


def make_key(*parts: Union[int, str]) -> StreamKey:
    out = []
    for p in parts:
        if isinstance(p, str):
            out.append(tag(p))
        else:
            p = int(p)
            # SeedSequence wants non-negative entropy words
            out.append(p if p >= 0 else (1 << 32) + (-p))
    return tuple(out)


def child(key: StreamKey, *parts: Union[int, str]) -> StreamKey:
    return key + make_key(*parts)


def generator(key: StreamKey) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))
