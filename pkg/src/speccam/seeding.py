"""Named sub-seed derivation.

Every random consumer asks for a generator by purpose string, so adding a
new consumer never shifts the streams of existing ones.
"""
import hashlib

import numpy as np


def derive_seed(seed: int, purpose: str) -> int:
    digest = hashlib.sha256(f"{purpose}\x00{int(seed)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, purpose))
