"""Deterministic seed derivation.

Every random draw in the package flows from a single 64-bit root seed.
Subsystems get their own streams via ``subsystem_seed(root, name)`` so that
adding or reordering consumers never perturbs unrelated ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def subsystem_seed(root_seed: int, name: str) -> int:
    """Derive a 64-bit seed for a named subsystem from the root seed.

    Uses SHA-256 over the little-endian root seed plus the subsystem name,
    so the split is stable across platforms and Python versions.
    """
    h = hashlib.sha256()
    h.update(int(root_seed).to_bytes(8, "little", signed=False))
    h.update(name.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def subsystem_rng(root_seed: int, name: str) -> np.random.Generator:
    """Generator seeded by ``subsystem_seed(root_seed, name)``."""
    return np.random.default_rng(subsystem_seed(root_seed, name))
