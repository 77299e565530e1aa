"""Named random substreams derived from one 64-bit run seed.

Each consumer asks for its own stream by name (``"split"``, ``"init"``,
``"sat/3"`` ...), so adding a consumer never shifts anyone else's draws.
"""
from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def _name_key(name: str) -> tuple[int, ...]:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def substream(seed: int, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & SEED_MASK, spawn_key=_name_key(name))
    return np.random.Generator(np.random.PCG64(ss))
