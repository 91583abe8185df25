"""Seed plumbing: every random decision flows from one root seed.

Each consumer (splitting, parameter init, batch shuffling, dropout, OOV
embedding rows, ablation cells) derives its own named substream, so enabling
or disabling one stage never shifts the random numbers another stage sees.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_rng(seed: int, *names: str) -> np.random.Generator:
    """Return a Generator for the substream identified by ``names``.

    The same (seed, names) pair always yields the same stream, on any
    platform, regardless of which other substreams were drawn from.
    """
    entropy = [seed & 0xFFFFFFFF] + [zlib.crc32(n.encode("utf-8")) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *names: str) -> int:
    """Collapse a named substream to a plain integer seed."""
    return int(derive_rng(seed, *names).integers(0, 2**31 - 1))
