"""Deterministic seed derivation.

All randomness in the toolkit flows from one base seed through named
sub-streams (episode, init, shuffle, split, augment, ...), so adding a
knob or reordering work never perturbs unrelated streams.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from any mix of ints and strings."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(*parts) -> np.random.Generator:
    """PCG64 generator seeded from a named sub-stream."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
