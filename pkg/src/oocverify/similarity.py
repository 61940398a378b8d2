"""Cosine similarity and the non-LVLM rerankers (cosine argsort, seeded random)."""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from typing import Optional, Sequence

from . import prng
from .errors import DimMismatch, EmptyItems, KOutOfRange, ZeroVector
from .model import Embedding


@dataclass(frozen=True)
class RankResult:
    order: tuple[int, ...]
    scores: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order must be a permutation of 0..n-1")
        if self.scores is not None:
            object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
            if len(self.scores) != len(self.order):
                raise ValueError("scores must align with order")


def _unit(e: Embedding | Sequence[float], index: Optional[int] = None) -> list[float]:
    values = e.values if isinstance(e, Embedding) else tuple(e)
    norm = math.hypot(*values)
    if norm == 0.0:
        raise ZeroVector(index)
    return [x / norm for x in values]


def _dot(a: Sequence[float], b: Sequence[float]) -> float:
    # fsum is exact over the rounded products, so equal inputs always score
    # equal; a BLAS reduction can differ by an ulp with row position
    return max(-1.0, min(1.0, math.fsum(map(operator.mul, a, b))))


def cosine(a: Embedding, b: Embedding) -> float:
    if len(a.values) != len(b.values):
        raise DimMismatch(f"dims differ: {len(a.values)} vs {len(b.values)}")
    return _dot(_unit(a), _unit(b))


def cosine_scores(query: Embedding, items: Sequence[Embedding]) -> list[float]:
    """Cosine of ``query`` against every item, in item order."""
    if not items:
        raise EmptyItems("no items to score")
    dim = len(query.values)
    for i, item in enumerate(items):
        if item.dim != dim:
            raise DimMismatch(f"item {i} has dim {item.dim}, query has {dim}")
    q = _unit(query)
    return [_dot(q, _unit(item, i)) for i, item in enumerate(items)]


def rerank_cosine(query: Embedding, items: Sequence[Embedding]) -> RankResult:
    scores = cosine_scores(query, items)
    # sorted() is stable, so ties keep retrieval order
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    return RankResult(order=tuple(order), scores=tuple(scores[i] for i in order))


def rerank_random(n: int, seed: int) -> RankResult:
    if n < 1:
        raise EmptyItems("cannot rank zero items")
    return RankResult(order=tuple(prng.permutation(n, seed)))


def top_k(result: RankResult, k: int) -> list[int]:
    if not 1 <= k <= len(result.order):
        raise KOutOfRange(f"k={k} outside 1..{len(result.order)}")
    return list(result.order[:k])
