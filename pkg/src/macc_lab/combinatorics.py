"""Exact combinatorial primitives.

Cache subsets are plain tuples of 1-based cache indices in ascending order,
so equal sets compare equal structurally. Every enumeration here is
lexicographic and lazy.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterator

CacheSubset = tuple[int, ...]
CachePermutation = tuple[int, ...]


def binomial(n: int, k: int) -> int:
    """Binomial coefficient, zero whenever ``n < 0``, ``k < 0`` or ``n < k``."""
    if n < 0 or k < 0 or n < k:
        return 0
    return math.comb(n, k)


def subsets(caches: int, size: int) -> list[CacheSubset]:
    """All ``size``-subsets of ``[1, caches]`` in lexicographic order."""
    if size < 0 or size > caches:
        return []
    return list(itertools.combinations(range(1, caches + 1), size))


def all_subsets(caches: int) -> list[CacheSubset]:
    """The full power set, ordered by size and then lexicographically."""
    return [s for size in range(caches + 1) for s in subsets(caches, size)]


def sub_subsets(base: CacheSubset, size: int) -> list[CacheSubset]:
    """``size``-subsets of an arbitrary sorted subset, lexicographic."""
    if size < 0 or size > len(base):
        return []
    return list(itertools.combinations(base, size))


def complement(caches: int, subset) -> CacheSubset:
    s = set(subset)
    return tuple(c for c in range(1, caches + 1) if c not in s)


def weak_compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Yield every ``parts``-tuple of non-negative integers summing to ``total``.

    Order is lexicographic, e.g. ``(2, 3)`` gives (0,0,2), (0,1,1), (0,2,0),
    (1,0,1), (1,1,0), (2,0,0). The number of tuples is
    ``binomial(total + parts - 1, total)``.
    """
    if total < 0 or parts < 1:
        return
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in weak_compositions(total - head, parts - 1):
            yield (head,) + tail


def count_weak_compositions(total: int, parts: int) -> int:
    if parts < 1:
        return 0
    return binomial(total + parts - 1, total)


def permutations(caches: int) -> Iterator[CachePermutation]:
    """All permutations of ``[1, caches]`` in lexicographic order."""
    return itertools.permutations(range(1, caches + 1))


def hockey_stick_check(n: int, k: int) -> bool:
    """Check sum_{i=k..n} C(i, k) == C(n + 1, k + 1) by direct summation."""
    return sum(binomial(i, k) for i in range(k, n + 1)) == binomial(n + 1, k + 1)
