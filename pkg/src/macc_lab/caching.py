"""File library and MAN placement.

Each file is cut into ``binomial(L, t)`` contiguous, equal, whole-byte
pieces indexed by the t-subsets of the caches in lexicographic order, and
cache ``l`` keeps every piece whose index contains ``l``. The placement
never looks at which users attach where.
"""
from __future__ import annotations

from fractions import Fraction
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .combinatorics import CacheSubset, binomial, subsets
from .errors import IndivisibleFileSize, ValidationError


class SubfileId(NamedTuple):
    file: int
    mask: CacheSubset

    def label(self) -> str:
        return f"{self.file}:" + ",".join(map(str, self.mask))


@dataclass(frozen=True, eq=False)
class Library:
    """``N`` files of ``bits`` bits each, held as one ``(N, bits // 8)`` byte array."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.dtype != np.uint8:
            raise ValidationError("library data must be a 2-D uint8 array")
        if self.data.shape[0] < 1:
            raise ValidationError("library needs at least one file")

    @property
    def files(self) -> int:
        return self.data.shape[0]

    @property
    def bits(self) -> int:
        return self.data.shape[1] * 8

    def file(self, n: int) -> bytes:
        return self.data[n - 1].tobytes()

    @classmethod
    def from_bytes(cls, files: list[bytes]) -> "Library":
        if not files:
            raise ValidationError("library needs at least one file")
        size = len(files[0])
        if any(len(f) != size for f in files):
            raise ValidationError("all files must have the same size")
        return cls(np.frombuffer(b"".join(files), dtype=np.uint8).reshape(len(files), size).copy())

    @classmethod
    def synthetic(cls, files: int, bits: int, seed: int) -> "Library":
        """Deterministic pseudo-random contents from a 64-bit seed."""
        if files < 1:
            raise ValidationError("library needs at least one file")
        if bits <= 0 or bits % 8:
            raise ValidationError(f"file size must be a positive multiple of 8 bits, got {bits}")
        rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
        return cls(rng.integers(0, 256, size=(files, bits // 8), dtype=np.uint8))

    @classmethod
    def from_directory(cls, path) -> "Library":
        """Load every regular file of a directory, sorted by name, as files 1..N."""
        entries = sorted(p for p in Path(path).iterdir() if p.is_file())
        return cls.from_bytes([p.read_bytes() for p in entries])


def subfile_parts(caches: int, t: int) -> int:
    return binomial(caches, t)


def suggest_file_bits(caches: int, t: int, at_least: int = 0) -> int:
    """Smallest file size (bits) >= ``at_least`` that splits into whole-byte subfiles."""
    unit = 8 * subfile_parts(caches, t)
    return max(1, -(-at_least // unit)) * unit


def _check_split(bits: int, caches: int, t: int) -> int:
    if not 0 <= t <= caches:
        raise ValidationError(f"t must lie in [0, {caches}], got {t}")
    parts = subfile_parts(caches, t)
    if bits % (8 * parts):
        raise IndivisibleFileSize(bits, parts, suggest_file_bits(caches, t, bits))
    return bits // 8 // parts


def split_file(file: bytes, caches: int, t: int) -> dict[CacheSubset, bytes]:
    step = _check_split(len(file) * 8, caches, t)
    return {m: file[i * step:(i + 1) * step] for i, m in enumerate(subsets(caches, t))}


@dataclass(frozen=True, eq=False)
class PlacedLibrary:
    library: Library
    caches: int
    t: int
    subfile_bytes: int
    masks: tuple[CacheSubset, ...]
    _mask_pos: dict = field(repr=False)

    @property
    def subfile_bits(self) -> int:
        return self.subfile_bytes * 8

    @property
    def memory(self):
        """Cache size ``M = t N / L`` in files, as an exact fraction."""
        return Fraction(self.t * self.library.files, self.caches) if self.caches else Fraction(0)

    def subfile(self, sid: SubfileId) -> np.ndarray:
        i = self._mask_pos[sid.mask]
        return self.library.data[sid.file - 1, i * self.subfile_bytes:(i + 1) * self.subfile_bytes]

    @cached_property
    def cache_contents(self) -> tuple[frozenset, ...]:
        """Index ``l - 1`` holds the subfile ids stored in cache ``l``."""
        return tuple(
            frozenset(
                SubfileId(n, m)
                for n in range(1, self.library.files + 1)
                for m in self.masks
                if ell in m
            )
            for ell in range(1, self.caches + 1)
        )

    def cache_bits(self, ell: int) -> int:
        return len(self.cache_contents[ell - 1]) * self.subfile_bits


def man_place(library: Library, caches: int, t: int) -> PlacedLibrary:
    step = _check_split(library.bits, caches, t)
    masks = tuple(subsets(caches, t))
    return PlacedLibrary(library, caches, t, step, masks, {m: i for i, m in enumerate(masks)})


def accessible_subfiles(placed: PlacedLibrary, user) -> set[SubfileId]:
    """Every subfile stored in at least one cache the user reads.

    ``user`` is a ``UserId`` or a bare cache subset.
    """
    user = set(getattr(user, "caches", user))
    if any(c < 1 or c > placed.caches for c in user):
        raise ValidationError(f"user caches {sorted(user)} out of range")
    return {
        SubfileId(n, m)
        for n in range(1, placed.library.files + 1)
        for m in placed.masks
        if user.intersection(m)
    }
