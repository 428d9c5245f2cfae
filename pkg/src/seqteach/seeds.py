"""Deterministic seed derivation.

Every random draw in this package is made from a child seed derived
from the master seed and the coordinates of the draw (stage, step,
direction, replicate, and so on). Derivation is a pure function, so
any subset of the work can run in any order, on any number of
workers, and still consume identical randomness.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def mix(*parts: int | str) -> int:
    """Fold the given parts into a single 63-bit seed.

    Integer parts are folded directly; strings are hashed bytewise
    first. The folding applies a splitmix64-style avalanche after
    each part, so nearby coordinate tuples produce unrelated seeds.
    """
    h = 0x9E3779B97F4A7C15
    for part in parts:
        if isinstance(part, str):
            v = 0xCBF29CE484222325
            for ch in part.encode("utf-8"):
                v = ((v ^ ch) * 0x100000001B3) & _MASK
            part = v
        h = (h ^ (int(part) & _MASK)) & _MASK
        h = (h * 0xBF58476D1CE4E5B9) & _MASK
        h = ((h ^ (h >> 31)) * 0x94D049BB133111EB) & _MASK
        h ^= h >> 29
    # numpy seeds must be nonnegative; drop the sign bit
    return h & ((1 << 63) - 1)
