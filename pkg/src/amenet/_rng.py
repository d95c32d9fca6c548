"""Named, reproducible random substreams.

Every random draw in the package comes from ``substream(seed, label, index)``.
The stream key is ``(seed, crc32(label), index)`` fed to numpy's
``SeedSequence``, so results do not depend on how work is scheduled.
"""
from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 20160101


def stream_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def substream(seed: int | None, label: str, index: int = 0) -> np.random.Generator:
    if seed is None:
        seed = DEFAULT_SEED
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream_key(label), int(index)]))
