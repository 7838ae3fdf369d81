"""Deterministic sub-stream seeding.

Every randomized operation derives its own 64-bit seed from the user seed
plus a context tuple (case id, scale index, class id, ...). Sub-streams are
therefore independent of evaluation order and reproducible across runs.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _chunks(field: int | str) -> list[int]:
    # Strings are length-prefixed so ("ab", "c") and ("a", "bc") cannot collide.
    if isinstance(field, str):
        raw = field.encode("utf-8")
        out = [0x5354 ^ len(raw)]
        for i in range(0, len(raw), 8):
            out.append(int.from_bytes(raw[i : i + 8], "little"))
        return out
    return [field & _MASK64]


def derive_seed(base: int, *fields: int | str) -> int:
    """Mix a base seed with context fields into a single 64-bit seed."""
    h = base & _MASK64
    for field in fields:
        for chunk in _chunks(field):
            h = splitmix64(h ^ chunk)
    return h


def rng_for(base: int, *fields: int | str) -> np.random.Generator:
    """A generator seeded from the mixed (base, *fields) value."""
    return np.random.default_rng(derive_seed(base, *fields))
