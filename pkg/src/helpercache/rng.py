"""Seed-stream derivation.

Every random quantity in the package is drawn from a generator derived from a
root seed plus a named stream key, so runs are reproducible and adding more
replications never perturbs the draws of earlier ones.  String parts are hashed
with crc32 (stable across processes, unlike ``hash``); integer parts are used
directly and must fit in uint32.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import InvalidParameterError


def stream(root_seed: int, *key: int | str) -> np.random.Generator:
    """Return an independent generator for (root_seed, key).

    The same (root_seed, key) pair always yields the same draw sequence, and
    distinct keys yield statistically independent streams (SeedSequence spawn
    keys).
    """
    parts = []
    for part in key:
        if isinstance(part, str):
            parts.append(zlib.crc32(part.encode("utf-8")))
        else:
            part = int(part)
            if not 0 <= part < 2**32:
                raise InvalidParameterError("stream key ints must be uint32")
            parts.append(part)
    seq = np.random.SeedSequence(int(root_seed), spawn_key=tuple(parts))
    return np.random.default_rng(seq)
