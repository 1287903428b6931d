"""Deterministic random substreams.

Every simulation block draws from its own generator, keyed by the master
seed, a stream name and the block index. Results therefore do not depend on
how blocks are spread over worker processes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")


def substream(seed: int, name: str = "", *indices: int) -> np.random.Generator:
    """Generator for (seed, name, *indices); identical inputs give identical streams."""
    key = (_name_key(name), *(int(i) for i in indices))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def derive_seed(seed: int, name: str) -> int:
    """64-bit child seed for a named sub-experiment."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_name_key(name),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
