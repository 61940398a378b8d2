import math
import random

import mpmath
import pytest
from hypothesis import assume, given, settings, strategies as st

from oocverify.errors import DimMismatch, EmptyItems, KOutOfRange, ZeroVector
from oocverify.model import Embedding
from oocverify.similarity import RankResult, cosine, rerank_cosine, rerank_random, top_k

mpmath.mp.dps = 50


def mp_cosine(a, b):
    a = [mpmath.mpf(x) for x in a]
    b = [mpmath.mpf(x) for x in b]
    dot = mpmath.fsum(x * y for x, y in zip(a, b))
    na = mpmath.sqrt(mpmath.fsum(x * x for x in a))
    nb = mpmath.sqrt(mpmath.fsum(y * y for y in b))
    return dot / (na * nb)


def pairwise_rank_oracle(scores):
    """Position of each item = number of items that beat it (higher score, or tie with lower index)."""
    n = len(scores)
    order = [None] * n
    for i in range(n):
        pos = sum(1 for j in range(n) if scores[j] > scores[i] or (scores[j] == scores[i] and j < i))
        order[pos] = i
    return order


E = lambda *v: Embedding(tuple(v))  # noqa: E731


def test_cosine_examples():
    assert cosine(E(3, 4), E(3, 4)) == 1.0
    assert cosine(E(1, 0), E(0, 1)) == 0.0
    assert cosine(E(1, 0), E(1, 1)) == pytest.approx(1 / math.sqrt(2), abs=1e-9)


def test_cosine_errors():
    with pytest.raises(DimMismatch):
        cosine(E(1, 0), E(1, 0, 0))
    with pytest.raises(ZeroVector):
        cosine(E(0, 0), E(1, 0))


def test_rerank_cosine_example():
    r = rerank_cosine(E(1, 0), [E(0, 1), E(1, 0), E(1, 1)])
    assert r.order == (1, 2, 0)
    assert r.scores == pytest.approx((1.0, 0.70710678, 0.0), abs=1e-8)


def test_rerank_cosine_singleton_and_ties():
    assert rerank_cosine(E(1, 2), [E(3, 1)]).order == (0,)
    assert rerank_cosine(E(1, 2), [E(3, 1), E(3, 1)]).order == (0, 1)


def test_rerank_cosine_errors():
    with pytest.raises(EmptyItems):
        rerank_cosine(E(1, 0), [])
    with pytest.raises(DimMismatch):
        rerank_cosine(E(1, 0), [E(1, 0), E(1, 0, 0)])
    with pytest.raises(ZeroVector) as info:
        rerank_cosine(E(1, 0), [E(1, 0), E(0, 0)])
    assert info.value.index == 1


finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


@st.composite
def vector_pairs(draw):
    dim = draw(st.integers(1, 16))
    a = draw(st.lists(finite, min_size=dim, max_size=dim))
    b = draw(st.lists(finite, min_size=dim, max_size=dim))
    assume(any(abs(x) > 1e-6 for x in a) and any(abs(x) > 1e-6 for x in b))
    return a, b


@given(vector_pairs())
def test_cosine_symmetric_and_bounded(pair):
    a, b = E(*pair[0]), E(*pair[1])
    c = cosine(a, b)
    assert c == cosine(b, a)
    assert -1.0 <= c <= 1.0
    assert abs(c - float(mp_cosine(pair[0], pair[1]))) < 1e-9


@given(vector_pairs(), st.floats(min_value=1e-3, max_value=1e3))
def test_cosine_scale_invariance(pair, s):
    a = pair[0]
    assert cosine(E(*a), E(*[s * x for x in a])) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2**32), st.integers(1, 64), st.integers(1, 32))
def test_rerank_cosine_matches_pairwise_oracle(seed, n, dim):
    rng = random.Random(seed)
    q = [rng.gauss(0, 1) for _ in range(dim)]
    items = [[rng.gauss(0, 1) for _ in range(dim)] for _ in range(n)]
    r = rerank_cosine(E(*q), [E(*x) for x in items])
    ref = [mp_cosine(q, x) for x in items]
    assert list(r.order) == pairwise_rank_oracle(ref)
    assert all(abs(s - float(ref[i])) < 1e-9 for s, i in zip(r.scores, r.order))
    assert all(x >= y for x, y in zip(r.scores, r.scores[1:]))


def test_rerank_random_examples():
    assert rerank_random(1, 99).order == (0,)
    assert rerank_random(5, 42).order == rerank_random(5, 42).order
    assert rerank_random(5, 42).scores is None
    with pytest.raises(EmptyItems):
        rerank_random(0, 1)


def test_rerank_random_first_position_is_uniform():
    counts = [0] * 5
    for seed in range(1, 1001):
        counts[rerank_random(5, seed).order[0]] += 1
    # binomial(1000, 0.2): mean 200, sigma ~12.65
    sigma = math.sqrt(1000 * 0.2 * 0.8)
    assert all(abs(c - 200) <= 5 * sigma for c in counts), counts


def test_top_k():
    r = RankResult((1, 2, 0))
    assert top_k(r, 1) == [1]
    assert top_k(r, 3) == [1, 2, 0]
    with pytest.raises(KOutOfRange):
        top_k(r, 4)
    with pytest.raises(KOutOfRange):
        top_k(r, 0)


def test_rank_result_validates_permutation():
    with pytest.raises(ValueError):
        RankResult((0, 0))


def test_identical_items_tie_exactly_at_any_position():
    rng = random.Random(3)
    base = [rng.gauss(0, 1) for _ in range(39)]
    others = [[rng.gauss(0, 1) for _ in range(39)] for _ in range(41)]
    items = others[:39] + [base] + others[39:] + [list(base)]
    r = rerank_cosine(E(*[rng.gauss(0, 1) for _ in range(39)]), [E(*v) for v in items])
    pos = r.order.index(39)
    assert r.order[pos + 1] == 42 and r.scores[pos] == r.scores[pos + 1]


def test_tiny_vectors_do_not_underflow():
    assert cosine(E(1e-200, 0), E(3e-200, 0)) == 1.0
