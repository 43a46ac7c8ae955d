"""Named random substreams derived from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for component ``name`` (``init``, ``shuffle``, ...).

    The same ``(seed, name, *extra)`` always yields the same stream, whatever
    else has been drawn elsewhere.
    """
    return np.random.default_rng([int(seed), zlib.crc32(name.encode()), *map(int, extra)])
