"""Connectivities between users and caches.

A connectivity records how many users are attached exactly to each subset
of caches. Users carry no identity beyond the ``(caches, k)`` pair, so two
connectivities with the same counts are the same object. Cacheless users
live under the empty subset.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, NamedTuple

from .combinatorics import (
    CacheSubset,
    all_subsets,
    binomial,
    count_weak_compositions,
    subsets,
    weak_compositions,
)
from .errors import ValidationError


class UserId(NamedTuple):
    caches: CacheSubset
    index: int

    def label(self) -> str:
        """Render as ``"1,2#1"`` (cacheless users render as ``"#1"``)."""
        return ",".join(map(str, self.caches)) + f"#{self.index}"

    @classmethod
    def parse(cls, text: str) -> "UserId":
        head, sep, idx = text.strip().rpartition("#")
        if not sep:
            raise ValidationError(f"bad user label {text!r}")
        caches = tuple(sorted(int(c) for c in head.split(",") if c.strip()))
        return cls(caches, int(idx))


def _subset_key(s: CacheSubset):
    return (len(s), s)


@dataclass(frozen=True)
class Connectivity:
    """User counts per cache subset; zero counts are dropped, keys sorted."""

    caches: int
    groups: tuple[tuple[CacheSubset, int], ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", dict(self.groups))

    @classmethod
    def from_counts(cls, caches: int, counts: Mapping) -> "Connectivity":
        if caches < 0:
            raise ValidationError("number of caches must be non-negative")
        merged: dict[CacheSubset, int] = {}
        for raw, count in counts.items():
            key = tuple(raw)
            if list(key) != sorted(set(key)):
                raise ValidationError(f"cache subset {raw!r} is not strictly increasing")
            if any(c < 1 or c > caches for c in key):
                raise ValidationError(f"cache subset {raw!r} out of range [1, {caches}]")
            if key in merged:
                raise ValidationError(f"duplicate cache subset {raw!r}")
            if count < 0:
                raise ValidationError(f"negative user count for {raw!r}")
            if count:
                merged[key] = int(count)
        groups = tuple(sorted(merged.items(), key=lambda kv: _subset_key(kv[0])))
        return cls(caches, groups)

    def count(self, subset) -> int:
        return self._index.get(tuple(subset), 0)

    @property
    def total_users(self) -> int:
        return sum(c for _, c in self.groups)

    def users(self) -> list[UserId]:
        """Users ordered by subset size, then subset, then index."""
        return [UserId(s, k) for s, c in self.groups for k in range(1, c + 1)]

    # JSON wire format
    def to_json_obj(self) -> dict:
        return {
            "lambda_caches": self.caches,
            "groups": [{"caches": list(s), "count": c} for s, c in self.groups],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Connectivity":
        try:
            caches = int(obj["lambda_caches"])
            groups = obj["groups"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed connectivity: {exc}") from None
        counts: dict = {}
        for g in groups:
            key = tuple(int(c) for c in g["caches"])
            if key in counts or tuple(sorted(key)) in counts:
                raise ValidationError(f"duplicate cache subset {list(key)}")
            counts[key] = int(g["count"])
        return cls.from_counts(caches, counts)

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)

    @classmethod
    def load(cls, path) -> "Connectivity":
        return cls.from_json_obj(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CombProfile:
    """Per-level user counts ``(K_0, ..., K_L)`` of a combinatorial topology."""

    caches: int
    per_level: tuple[int, ...]

    def __post_init__(self):
        if len(self.per_level) != self.caches + 1:
            raise ValidationError(
                f"profile needs {self.caches + 1} entries, got {len(self.per_level)}"
            )
        if any(k < 0 for k in self.per_level):
            raise ValidationError("profile entries must be non-negative")

    @classmethod
    def parse(cls, caches: int, text: str) -> "CombProfile":
        return cls(caches, tuple(int(x) for x in text.split(",")))

    @property
    def total_users(self) -> int:
        return sum(k * binomial(self.caches, lam) for lam, k in enumerate(self.per_level))


def build_combinatorial(profile: CombProfile) -> Connectivity:
    counts = {}
    for lam, k in enumerate(profile.per_level):
        if k:
            for s in subsets(profile.caches, lam):
                counts[s] = k
    return Connectivity.from_counts(profile.caches, counts)


def build_cyclic(caches: int, lam: int) -> Connectivity:
    """``caches`` users, user i on caches i..i+lam-1 with wrap-around."""
    if not 1 <= lam <= caches:
        raise ValidationError("cyclic topology needs 1 <= lambda <= caches")
    counts: dict[CacheSubset, int] = {}
    for i in range(caches):
        key = tuple(sorted({(i + j) % caches + 1 for j in range(lam)}))
        counts[key] = counts.get(key, 0) + 1
    return Connectivity.from_counts(caches, counts)


def _distribute(caches: int, states: list[CacheSubset], users: int) -> Iterator[Connectivity]:
    for comp in weak_compositions(users, len(states)):
        yield Connectivity.from_counts(caches, {s: c for s, c in zip(states, comp) if c})


def enumerate_B_lambda(caches: int, lam: int, users: int) -> Iterator[Connectivity]:
    """Every way to place ``users`` users on the ``lam``-subsets of the caches."""
    if not 0 <= lam <= caches:
        raise ValidationError("need 0 <= lambda <= caches")
    return _distribute(caches, subsets(caches, lam), users)


def enumerate_B(caches: int, users: int) -> Iterator[Connectivity]:
    """Every way to place ``users`` users on any subset (including the empty one)."""
    return _distribute(caches, all_subsets(caches), users)


def ensemble_size(caches: int, users: int, lam: int | None = None) -> int:
    """Closed-form ensemble size without enumerating."""
    states = 2**caches if lam is None else binomial(caches, lam)
    return count_weak_compositions(users, states)


def is_all_on_one_subset(conn: Connectivity) -> bool:
    return len(conn.groups) == 1


@dataclass(frozen=True)
class Membership:
    levels: tuple[int, ...]
    is_combinatorial: bool
    profile: CombProfile | None

    def in_B_lambda(self, lam: int) -> bool:
        return self.levels == (lam,)


def membership(conn: Connectivity) -> Membership:
    levels = tuple(sorted({len(s) for s, _ in conn.groups}))
    per_level = [0] * (conn.caches + 1)
    combinatorial = True
    for lam in levels:
        counts = {c for s, c in conn.groups if len(s) == lam}
        covered = sum(1 for s, _ in conn.groups if len(s) == lam)
        if len(counts) != 1 or covered != binomial(conn.caches, lam):
            combinatorial = False
            break
        per_level[lam] = counts.pop()
    profile = CombProfile(conn.caches, tuple(per_level)) if combinatorial else None
    return Membership(levels, combinatorial, profile)
