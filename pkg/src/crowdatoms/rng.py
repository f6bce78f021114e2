"""Seed derivation for reproducible, independently seeded pipeline stages.

Every stage draws from its own generator derived from (root seed, stage
name), so adding randomness to one stage never perturbs another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, name: str) -> int:
    """Map (root seed, stage name) to a stable 63-bit stream seed."""
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def stage_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for one named stage; identical across runs and platforms."""
    return np.random.default_rng(derive_seed(seed, name))
