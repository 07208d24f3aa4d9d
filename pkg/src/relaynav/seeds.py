"""Stable seed derivation.

Every stochastic component draws from a seed derived from the run's root seed
plus a string path naming the component, so independent streams never alias and
results are reproducible across platforms and Python versions.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(root: int, *parts: str | int) -> int:
    """Fold ``root`` and the component path into a stable 64-bit seed."""
    key = ":".join([str(int(root))] + [str(p) for p in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(root: int, *parts: str | int) -> random.Random:
    """Seeded ``random.Random`` for the component named by ``parts``."""
    return random.Random(derive_seed(root, *parts))
