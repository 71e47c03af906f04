"""Labeled pseudorandom streams derived from one master seed.

Each consumer (noise schedule, cost coins, trial branches, ...) gets its own
stream keyed by a string label, so adding a consumer never perturbs the draws
of existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def rng_for(seed: int, label: str) -> np.random.Generator:
    """Deterministic generator for (seed, label); stable across runs and platforms."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(label.encode())]))
