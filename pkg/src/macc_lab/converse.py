"""Lower bounds on the delivery load.

Everything here is exact: loads are ``Fraction`` values normalised by the
file size. Vertices of the side-information graph are ``(user, mask)``
pairs: the piece of the user's requested file stored exactly on ``mask``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .combinatorics import CacheSubset, binomial, permutations, sub_subsets
from .errors import (
    CyclicSubset,
    DivisibilityViolation,
    NonDistinctDemand,
    OutOfRange,
    TooLarge,
    UnknownVertex,
    ValidationError,
)
from .topology import (
    CombProfile,
    Connectivity,
    UserId,
    enumerate_B,
    enumerate_B_lambda,
    ensemble_size,
)

Vertex = tuple[UserId, CacheSubset]

MAX_PERMUTATION_CACHES = 6


def _masks(caches: int, t: int | None, within: CacheSubset | None = None) -> list[CacheSubset]:
    """Masks inside ``within`` (default: all caches); all sizes when ``t`` is None."""
    base = tuple(range(1, caches + 1)) if within is None else within
    if t is None:
        return [s for size in range(len(base) + 1) for s in sub_subsets(base, size)]
    return sub_subsets(base, t)


def _require_distinct(demand) -> None:
    if demand is not None and not demand.distinct:
        raise NonDistinctDemand("converse bounds assume every user requests a different file")


@dataclass(frozen=True, eq=False)
class SideInfoGraph:
    """Digraph over requested pieces; ``v -> w`` when w's requester caches v."""

    vertices: tuple[Vertex, ...]
    successors: Mapping[Vertex, frozenset]

    def has_edge(self, v: Vertex, w: Vertex) -> bool:
        return w in self.successors[v]


def _edge(v: Vertex, w: Vertex) -> bool:
    return v[0] != w[0] and bool(set(v[1]).intersection(w[0].caches))


def build_side_info_graph(conn: Connectivity, demand=None, t: int | None = None) -> SideInfoGraph:
    """Side-information graph of a connectivity under a distinct demand.

    With ``t`` given only masks of size ``t`` exist (MAN split); otherwise
    every mask of the generic ``2^L`` split is a vertex.
    """
    _require_distinct(demand)
    verts: list[Vertex] = []
    for user in conn.users():
        free = tuple(c for c in range(1, conn.caches + 1) if c not in user.caches)
        verts.extend((user, m) for m in _masks(conn.caches, t, free))
    succ = {v: frozenset(w for w in verts if _edge(v, w)) for v in verts}
    return SideInfoGraph(tuple(verts), succ)


def acyclic_set(conn: Connectivity, demand, perm: Sequence[int], t: int | None = None) -> list[Vertex]:
    """Acyclic vertex set built from a cache permutation.

    Cacheless users contribute every piece. Walking the permutation, the
    users whose last cache appears at position ``i`` contribute the pieces
    stored only on caches not yet visited.
    """
    _require_distinct(demand)
    caches = conn.caches
    if sorted(perm) != list(range(1, caches + 1)):
        raise ValidationError(f"{perm!r} is not a permutation of [1, {caches}]")
    out: list[Vertex] = []
    for k in range(1, conn.count(()) + 1):
        out.extend((UserId((), k), m) for m in _masks(caches, t))
    for lam in range(1, caches + 1):
        for i in range(lam, caches + 1):
            prefix = perm[:i]
            rest = tuple(sorted(perm[i:]))
            head = tuple(sorted(prefix[:-1]))
            for others in sub_subsets(head, lam - 1):
                group = tuple(sorted(others + (prefix[-1],)))
                for k in range(1, conn.count(group) + 1):
                    out.extend((UserId(group, k), m) for m in _masks(caches, t, rest))
    return out


def is_acyclic(graph: SideInfoGraph, subset: Iterable[Vertex]) -> bool:
    """Cycle check on the induced subgraph (iterative DFS, three colours)."""
    nodes = list(subset)
    chosen = set(nodes)
    for v in nodes:
        if v not in graph.successors:
            raise UnknownVertex(v)
    white, grey, black = 0, 1, 2
    colour = dict.fromkeys(chosen, white)
    for root in nodes:
        if colour[root] != white:
            continue
        colour[root] = grey
        stack = [(root, iter(graph.successors[root] & chosen))]
        while stack:
            v, it = stack[-1]
            for w in it:
                if colour[w] == grey:
                    return False
                if colour[w] == white:
                    colour[w] = grey
                    stack.append((w, iter(graph.successors[w] & chosen)))
                    break
            else:
                colour[v] = black
                stack.pop()
    return True


def index_coding_bound(graph: SideInfoGraph, subset: Sequence[Vertex], subfile_bits) -> int:
    """Total size of an acyclic vertex set: no delivery can send fewer bits.

    ``subfile_bits`` is a mapping vertex -> bits, a callable, or one size
    shared by all vertices.
    """
    if not is_acyclic(graph, subset):
        raise CyclicSubset("vertex set contains a cycle")
    if isinstance(subfile_bits, int):
        return subfile_bits * len(subset)
    size = subfile_bits if callable(subfile_bits) else subfile_bits.__getitem__
    return sum(size(v) for v in subset)


def per_connectivity_bound(
    conn: Connectivity,
    t: int,
    *,
    demand=None,
    verify: bool = False,
    max_caches: int = MAX_PERMUTATION_CACHES,
) -> Fraction:
    """Best acyclic-set bound over all cache permutations, MAN split at ``t``.

    Pieces are ``1 / C(L, t)`` of a file each, so the value does not depend on
    which distinct files are requested. ``verify`` rebuilds the graph and
    checks every permutation's set for cycles (slow; for small instances).
    """
    caches = conn.caches
    if caches > max_caches:
        raise TooLarge("permutation scan", math.factorial(caches), math.factorial(max_caches))
    if not 0 <= t <= caches:
        raise OutOfRange(f"t must lie in [0, {caches}]")
    graph = build_side_info_graph(conn, demand, t) if verify else None
    best = 0
    for perm in permutations(caches):
        vs = acyclic_set(conn, demand, perm, t)
        if graph is not None:
            index_coding_bound(graph, vs, 1)
        best = max(best, len(vs))
    return Fraction(best, binomial(caches, t))


# closed forms ---------------------------------------------------------------


def r_comb_lb(profile: CombProfile, t: int) -> Fraction:
    """Optimal combinatorial-topology load at integer ``t``."""
    caches = profile.caches
    if not 0 <= t <= caches:
        raise OutOfRange(f"t must lie in [0, {caches}]")
    return sum(
        (Fraction(profile.per_level[lam] * binomial(caches, t + lam), binomial(caches, t))
         for lam in range(0, caches - t + 1)),
        Fraction(0),
    )


def interpolate(values: Callable[[int], Fraction], t) -> Fraction:
    """Memory sharing between the integer points around a fractional ``t``."""
    t = Fraction(t)
    lo = math.floor(t)
    if t == lo:
        return values(lo)
    frac = t - lo
    return (1 - frac) * values(lo) + frac * values(lo + 1)


def f_comb(profile: CombProfile, t) -> Fraction:
    """Converse objective of the combinatorial topology, for integer or fractional ``t``."""
    return interpolate(lambda s: r_comb_lb(profile, s), t)


def second_differences(seq: Sequence[Fraction]) -> list[Fraction]:
    return [seq[i] - 2 * seq[i + 1] + seq[i + 2] for i in range(len(seq) - 2)]


def _isum(users: int, states: int) -> int:
    return sum((users - i) * binomial(i + states - 2, i) for i in range(1, users))


def a_t(caches: int, lam: int, users: int, t: int) -> Fraction:
    size = ensemble_size(caches, users, lam)
    return Fraction(users * binomial(caches - t, lam), size) * (1 - Fraction(1, binomial(t + lam, lam)))


def r_avg_lb_B_lambda(caches: int, lam: int, users: int, t: int) -> Fraction:
    """Lower bound on the average load over the ensemble where all users see ``lam`` caches."""
    if not 0 <= lam <= caches:
        raise OutOfRange("need 0 <= lambda <= caches")
    if not 0 <= t <= caches:
        raise OutOfRange(f"t must lie in [0, {caches}]")
    main = Fraction(users * binomial(caches, t + lam), binomial(caches, lam) * binomial(caches, t))
    return main + a_t(caches, lam, users, t)


def a_t_lambda(caches: int, users: int, t: int, lam: int) -> Fraction:
    size = ensemble_size(caches, users)
    return Fraction(users * binomial(caches - t, lam), size) * (1 - Fraction(1, binomial(t + lam, lam)))


def b_summand(caches: int, users: int, t: int, lam: int) -> Fraction:
    """One ``lam`` term of the full-ensemble bound."""
    if lam > caches - t:
        # both pieces vanish by the zero-extended binomial
        return Fraction(0)
    main = Fraction(users * binomial(caches, t + lam), 2**caches * binomial(caches, t))
    return main + a_t_lambda(caches, users, t, lam)


def r_avg_lb_B(caches: int, users: int, t: int, *, full_range: bool = False) -> Fraction:
    """Lower bound on the average load over every possible connectivity.

    Summation runs over ``lam in [0, L - t]``; ``full_range`` sums over
    ``[0, L]`` instead, which gives the same value.
    """
    if not 0 <= t <= caches:
        raise OutOfRange(f"t must lie in [0, {caches}]")
    top = caches if full_range else caches - t
    if not full_range:
        return sum((b_summand(caches, users, t, lam) for lam in range(top + 1)), Fraction(0))
    total = Fraction(0)
    for lam in range(top + 1):
        main = Fraction(users * binomial(caches, t + lam), 2**caches * binomial(caches, t))
        total += main + a_t_lambda(caches, users, t, lam)
    return total


def avg_bound_unsimplified(caches: int, users: int, t: int, lam: int | None = None) -> Fraction:
    """Ensemble bound in raw counting form, before any hockey-stick step.

    ``lam=None`` selects the full ensemble (``2^L`` states per user);
    otherwise the fixed-``lam`` ensemble.
    """
    if lam is not None:
        states = binomial(caches, lam)
        size = ensemble_size(caches, users, lam)
        return Fraction(
            users * binomial(caches - t, lam) * binomial(caches, t)
            + binomial(caches, t + lam) * _isum(users, states),
            size * binomial(caches, t),
        )
    states = 2**caches
    size = ensemble_size(caches, users)
    total = Fraction(0)
    for j in range(caches - t + 1):
        total += Fraction(
            users * binomial(caches - t, j) * binomial(caches, t)
            + binomial(caches, t + j) * _isum(users, states),
            size * binomial(caches, t),
        )
    return total


def counting_closed_form(caches: int, users: int, lam: int | None = None) -> int:
    """Closed form of the sum over an ensemble of the users sitting on one fixed subset."""
    states = 2**caches if lam is None else binomial(caches, lam)
    return users + _isum(users, states)


def _ensemble(caches: int, users: int, lam: int | None, cap: int):
    size = ensemble_size(caches, users, lam)
    if size > cap:
        raise TooLarge("ensemble", size, cap)
    return enumerate_B(caches, users) if lam is None else enumerate_B_lambda(caches, lam, users)


def ensemble_counting_oracle(
    caches: int, users: int, subset, lam: int | None = None, cap: int = 10**6
) -> int:
    """Enumerate the ensemble and add up the users attached exactly to ``subset``."""
    subset = tuple(subset)
    if lam is not None and len(subset) != lam:
        raise ValidationError(f"subset {subset} does not have size {lam}")
    return sum(conn.count(subset) for conn in _ensemble(caches, users, lam, cap))


def ensemble_gap(caches: int, lam: int, users: int, t: int) -> Fraction:
    """Average-ensemble bound minus the combinatorial optimum with the same users."""
    per_set, rem = divmod(users, binomial(caches, lam))
    if rem:
        raise DivisibilityViolation(f"C({caches}, {lam}) does not divide K = {users}")
    profile = CombProfile(caches, tuple(per_set if j == lam else 0 for j in range(caches + 1)))
    return r_avg_lb_B_lambda(caches, lam, users, t) - r_comb_lb(profile, t)


def ensemble_bound_oracle(caches: int, users: int, t: int, lam: int | None = None, cap: int = 10**5) -> Fraction:
    """Brute-force ensemble average of the acyclic-set bound with the MAN split at ``t``.

    Connectivities with every user on one subset ``U`` use the single
    permutation that lists ``U`` first (each block ascending); all others
    average over every permutation. This is the averaging the closed-form
    ensemble bounds are derived from, so the two must agree exactly.
    """
    if caches > MAX_PERMUTATION_CACHES:
        raise TooLarge("permutation scan", math.factorial(caches), math.factorial(MAX_PERMUTATION_CACHES))
    perms = list(permutations(caches))
    total = Fraction(0)
    count = 0
    for conn in _ensemble(caches, users, lam, cap):
        count += 1
        if len(conn.groups) == 1:
            u = conn.groups[0][0]
            perm = u + tuple(c for c in range(1, caches + 1) if c not in u)
            total += len(acyclic_set(conn, None, perm, t))
        else:
            total += Fraction(sum(len(acyclic_set(conn, None, p, t)) for p in perms), len(perms))
    return total / (count * binomial(caches, t))


# curves ---------------------------------------------------------------------


@dataclass(frozen=True)
class CornerPoint:
    t: int
    memory: Fraction
    load: Fraction
    source: str


@dataclass(frozen=True)
class BoundCurve:
    files: int
    caches: int
    corners: tuple[CornerPoint, ...]

    def evaluate(self, memory) -> Fraction:
        """Piece-wise linear interpolation between corners."""
        m = Fraction(memory)
        if m < 0 or m > self.files:
            raise OutOfRange(f"memory {m} outside [0, {self.files}]")
        pts = self.corners
        if m >= pts[-1].memory:
            return pts[-1].load
        for a, b in zip(pts, pts[1:]):
            if a.memory <= m <= b.memory:
                w = (m - a.memory) / (b.memory - a.memory)
                return a.load + w * (b.load - a.load)
        raise OutOfRange(f"memory {m} not covered by corners")  # unreachable for sorted corners

    def is_non_increasing(self) -> bool:
        return all(a.load >= b.load for a, b in zip(self.corners, self.corners[1:]))

    def is_convex(self) -> bool:
        slopes = [
            (b.load - a.load) / (b.memory - a.memory)
            for a, b in zip(self.corners, self.corners[1:])
        ]
        return all(s1 <= s2 for s1, s2 in zip(slopes, slopes[1:]))

    def to_csv(self, extra: Mapping[int, Fraction] | None = None, extra_name: str = "gap") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t", "M_num", "M_den", "R_num", "R_den", "R_decimal"]
        if extra is not None:
            header += [f"{extra_name}_num", f"{extra_name}_den"]
        w.writerow(header)
        for c in self.corners:
            row = [c.t, c.memory.numerator, c.memory.denominator,
                   c.load.numerator, c.load.denominator, f"{float(c.load):.12g}"]
            if extra is not None:
                g = extra.get(c.t)
                row += ["", ""] if g is None else [g.numerator, g.denominator]
            w.writerow(row)
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        return {
            "files": self.files,
            "caches": self.caches,
            "corners": [
                {
                    "t": c.t,
                    "M": str(c.memory),
                    "R": str(c.load),
                    "R_decimal": float(c.load),
                    "provenance": c.source,
                }
                for c in self.corners
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)


def curve(values: Mapping[int, Fraction] | Sequence[Fraction], files: int, caches: int, source: str) -> BoundCurve:
    """Build a curve from corner loads indexed by integer ``t``."""
    items = sorted(values.items()) if isinstance(values, Mapping) else list(enumerate(values))
    if not items:
        raise ValidationError("curve needs at least one corner")
    corners = tuple(
        CornerPoint(t, Fraction(t * files, caches) if caches else Fraction(0), Fraction(r), source)
        for t, r in items
    )
    return BoundCurve(files, caches, corners)


SOURCE_COMB = "combinatorial-optimum"
SOURCE_B_LAMBDA = "fixed-lambda-ensemble-lower-bound"
SOURCE_B = "full-ensemble-lower-bound"


def comb_curve(profile: CombProfile, files: int) -> BoundCurve:
    vals = [r_comb_lb(profile, t) for t in range(profile.caches + 1)]
    return curve(vals, files, profile.caches, SOURCE_COMB)


def b_lambda_curve(caches: int, lam: int, users: int, files: int) -> BoundCurve:
    top = min(caches, caches - lam + 1)
    vals = [r_avg_lb_B_lambda(caches, lam, users, t) for t in range(top + 1)]
    return curve(vals, files, caches, SOURCE_B_LAMBDA)


def b_curve(caches: int, users: int, files: int) -> BoundCurve:
    vals = [r_avg_lb_B(caches, users, t) for t in range(caches + 1)]
    return curve(vals, files, caches, SOURCE_B)


