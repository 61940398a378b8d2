"""Portable seeded permutations.

Python's ``random`` and numpy's generators do not promise identical streams
across releases, so permutations that end up in datasets and reports come
from SplitMix64 driving a Fisher-Yates shuffle. Both are fully specified here.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, TypeVar

T = TypeVar("T")

ALGORITHM = "splitmix64-fisher-yates/v1"

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound


def derive_seed(root: int, *labels: str) -> int:
    """Stable 64-bit sub-seed for a named purpose (e.g. a sample id)."""
    h = hashlib.sha256(str(root).encode())
    for label in labels:
        h.update(b"\x00" + label.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def permutation(n: int, seed: int) -> list[int]:
    rng = SplitMix64(seed)
    out = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def shuffled(items: Sequence[T], seed: int) -> list[T]:
    return [items[i] for i in permutation(len(items), seed)]
