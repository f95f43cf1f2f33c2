"""Portable deterministic randomness built on 64-bit avalanche mixing.

Every stochastic step in the toolkit (split shuffling, read simulation,
weight initialization) derives its draws from splitmix64-style mixing over
explicit integer words instead of a platform RNG, so artifacts are
byte-identical across runs, platforms, and the numba/numpy kernel paths.
"""

from __future__ import annotations

M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def splitmix64(x: int) -> int:
    """One splitmix64 step: avalanche of x + golden-ratio increment."""
    z = (x + GOLDEN) & M64
    z = ((z ^ (z >> 30)) * MIX_A) & M64
    z = ((z ^ (z >> 27)) * MIX_B) & M64
    return z ^ (z >> 31)


def mix64(*words: int) -> int:
    """Fold any number of integer words into one 64-bit hash."""
    h = 0
    for w in words:
        h = splitmix64(h ^ (w & M64))
    return h


def fnv1a64(data: bytes) -> int:
    """FNV-1a over bytes; the stable string hash (never Python's salted one)."""
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & M64
    return h


def str_key(s: str) -> int:
    return fnv1a64(s.encode("utf-8"))


def unit_float(*words: int) -> float:
    """Uniform double in [0, 1) from the top 53 bits of mix64(words)."""
    return (mix64(*words) >> 11) * 2.0**-53
