"""Invariant suite behind ``macc-lab verify``.

Each check returns a ``CheckResult``; nothing here raises on a failed
property, so one run reports every failure at once.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from . import converse as cv
from .caching import Library, man_place, suggest_file_bits
from .combinatorics import binomial, hockey_stick_check, permutations, subsets
from .delivery import DemandVector, comb_deliver, corrupt, greedy_deliver, measured_load, verify_all
from .topology import (
    CombProfile,
    Connectivity,
    build_combinatorial,
    enumerate_B,
    enumerate_B_lambda,
    ensemble_size,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    detail: str = ""


def profiles(caches: int, max_users: int, max_per_level: int = 2) -> Iterator[CombProfile]:
    """Every profile with entries <= ``max_per_level`` and at most ``max_users`` users."""
    for levels in itertools.product(range(max_per_level + 1), repeat=caches + 1):
        p = CombProfile(caches, levels)
        if 0 < p.total_users <= max_users:
            yield p


def random_profile(rng: random.Random, caches: int, max_users: int) -> CombProfile:
    while True:
        levels = tuple(rng.choice((0, 0, 1, 1, 2)) for _ in range(caches + 1))
        p = CombProfile(caches, levels)
        if 0 < p.total_users <= max_users:
            return p


def check_hockey_stick(max_n: int = 20) -> CheckResult:
    cases = [(n, k) for n in range(max_n + 1) for k in range(n + 1)]
    bad = [c for c in cases if not hockey_stick_check(*c)]
    return CheckResult("hockey-stick", not bad, len(cases), f"failures: {bad[:5]}" if bad else "")


def check_ensemble_sizes(max_caches: int = 4, max_users: int = 4) -> CheckResult:
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        for K in range(1, max_users + 1):
            n += 1
            if sum(1 for _ in enumerate_B(L, K)) != ensemble_size(L, K):
                bad.append((L, K, None))
            for lam in range(L + 1):
                n += 1
                if sum(1 for _ in enumerate_B_lambda(L, lam, K)) != ensemble_size(L, K, lam):
                    bad.append((L, K, lam))
    return CheckResult("ensemble-sizes", not bad, n, f"failures: {bad[:5]}" if bad else "")


def check_counting_oracle(max_caches: int = 4, max_users: int = 4) -> CheckResult:
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        for K in range(1, max_users + 1):
            # full ensemble: a few subsets per size keep the run short
            for size in range(L + 1):
                for u in subsets(L, size)[:2]:
                    n += 1
                    if cv.ensemble_counting_oracle(L, K, u) != cv.counting_closed_form(L, K):
                        bad.append((L, K, u, None))
            for lam in range(L + 1):
                closed = cv.counting_closed_form(L, K, lam)
                for u in subsets(L, lam):
                    n += 1
                    if cv.ensemble_counting_oracle(L, K, u, lam) != closed:
                        bad.append((L, K, u, lam))
    return CheckResult("counting-oracle", not bad, n, f"failures: {bad[:5]}" if bad else "")


def check_algebra(max_caches: int = 5, max_users: int = 6) -> CheckResult:
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        for K in range(1, max_users + 1):
            for t in range(L + 1):
                n += 1
                if cv.avg_bound_unsimplified(L, K, t) != cv.r_avg_lb_B(L, K, t):
                    bad.append((L, K, t, None))
                if cv.r_avg_lb_B(L, K, t) != cv.r_avg_lb_B(L, K, t, full_range=True):
                    bad.append((L, K, t, "range"))
                for lam in range(L + 1):
                    if t > L - lam + 1:
                        continue
                    n += 1
                    if cv.avg_bound_unsimplified(L, K, t, lam) != cv.r_avg_lb_B_lambda(L, lam, K, t):
                        bad.append((L, K, t, lam))
    return CheckResult("hockey-stick-algebra", not bad, n, f"failures: {bad[:5]}" if bad else "")


def check_ensemble_average(max_caches: int = 3, max_users: int = 3) -> CheckResult:
    """Brute-force permutation averaging reproduces the ensemble closed forms."""
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        for K in range(1, max_users + 1):
            for t in range(L + 1):
                n += 1
                if cv.ensemble_bound_oracle(L, K, t) != cv.r_avg_lb_B(L, K, t):
                    bad.append((L, K, t, None))
                for lam in range(L + 1):
                    n += 1
                    if cv.ensemble_bound_oracle(L, K, t, lam) != cv.r_avg_lb_B_lambda(L, lam, K, t):
                        bad.append((L, K, t, lam))
    return CheckResult("ensemble-average-oracle", not bad, n, f"failures: {bad[:5]}" if bad else "")


def check_acyclicity(max_caches: int = 4, max_users: int = 2, samples: int = 100, seed: int = 0) -> CheckResult:
    """Permutation-built vertex sets contain no cycle (generic 2^L split)."""
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        perms = list(permutations(L))
        for K in range(1, max_users + 1):
            for conn in enumerate_B(L, K):
                users = conn.users()
                for files in itertools.permutations(range(1, K + 1)):
                    demand = DemandVector(dict(zip(users, files)))
                    graph = cv.build_side_info_graph(conn, demand)
                    for perm in perms:
                        n += 1
                        if not cv.is_acyclic(graph, cv.acyclic_set(conn, demand, perm)):
                            bad.append((conn.to_json_obj(), perm))
    rng = random.Random(seed)
    for _ in range(samples):
        L = rng.randint(2, 4)
        K = rng.randint(3, 5)
        states = [s for size in range(L + 1) for s in subsets(L, size)]
        counts: dict = {}
        for _ in range(K):
            s = rng.choice(states)
            counts[s] = counts.get(s, 0) + 1
        conn = Connectivity.from_counts(L, counts)
        users = conn.users()
        demand = DemandVector(dict(zip(users, rng.sample(range(1, 2 * K + 1), K))))
        t = rng.choice([None, rng.randint(0, L)])
        graph = cv.build_side_info_graph(conn, demand, t)
        perm = tuple(rng.sample(range(1, L + 1), L))
        n += 1
        if not cv.is_acyclic(graph, cv.acyclic_set(conn, demand, perm, t)):
            bad.append((conn.to_json_obj(), perm, t))
    return CheckResult("acyclicity", not bad, n, f"cycles found: {bad[:3]}" if bad else "")


def _convex_nonincreasing(vals: list[Fraction]) -> bool:
    return all(d >= 0 for d in cv.second_differences(vals)) and all(
        a >= b for a, b in zip(vals, vals[1:])
    )


def check_convexity(max_caches: int = 12, max_users: int = 6) -> CheckResult:
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        # combinatorial family: one-hot profiles plus a few mixes
        shapes = [tuple(int(j == lam) for j in range(L + 1)) for lam in range(L + 1)]
        shapes += [tuple((j * 7 + s) % 3 for j in range(L + 1)) for s in range(3)]
        for levels in shapes:
            p = CombProfile(L, levels)
            vals = [cv.r_comb_lb(p, t) for t in range(L + 1)]
            n += 1
            if not _convex_nonincreasing(vals) or vals[0] != p.total_users or vals[-1] != levels[0]:
                bad.append(("comb", levels))
        for K in range(1, max_users + 1):
            for lam in range(L + 1):
                vals = [cv.r_avg_lb_B_lambda(L, lam, K, t) for t in range(L + 1)]
                n += 1
                if not _convex_nonincreasing(vals):
                    bad.append(("B_lambda", L, lam, K))
            for lam in range(L + 1):
                vals = [cv.b_summand(L, K, t, lam) for t in range(L + 1)]
                n += 1
                if not _convex_nonincreasing(vals):
                    bad.append(("B", L, lam, K))
    return CheckResult("convexity", not bad, n, f"failures: {bad[:5]}" if bad else "")


def check_ensemble_gap(max_caches: int = 6, multiples: int = 2) -> CheckResult:
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        # lam = 0 is excluded: the cacheless ensemble has a single member and no gap
        for lam in range(1, L + 1):
            for m in range(1, multiples + 1):
                K = m * binomial(L, lam)
                for t in range(0, L - lam + 1):
                    n += 1
                    gap = cv.ensemble_gap(L, lam, K, t)
                    at = cv.a_t(L, lam, K, t)
                    if gap != at or (t >= 1 and not at > 0):
                        bad.append((L, lam, K, t))
    return CheckResult("corollary-gap", not bad, n, f"failures: {bad[:5]}" if bad else "")


def check_tightness(max_caches: int = 4, max_users: int = 12) -> CheckResult:
    """Simulated load == closed form == acyclic-set bound on combinatorial topologies."""
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        for p in profiles(L, max_users, 1 if L > 3 else 2):
            conn = build_combinatorial(p)
            K = p.total_users
            for t in range(L + 1):
                bits = suggest_file_bits(L, t)
                placed = man_place(Library.synthetic(K, bits, 1234 + K), L, t)
                demand = DemandVector(dict(zip(conn.users(), range(1, K + 1))))
                load = measured_load(comb_deliver(placed, p, demand), bits)
                n += 1
                if not load == cv.r_comb_lb(p, t) == cv.per_connectivity_bound(conn, t):
                    bad.append((p.per_level, t))
    return CheckResult("tightness", not bad, n, f"failures: {bad[:5]}" if bad else "")


def check_decodability(cases: int = 60, seed: int = 0, mutate: int | None = None) -> CheckResult:
    """Every user recovers its file bit-exactly; ``mutate`` corrupts one message per case."""
    rng = random.Random(seed)
    bad, users = [], 0
    for case in range(cases):
        L = rng.randint(1, 5)
        t = rng.randint(0, L)
        p = random_profile(rng, L, 24)
        conn = build_combinatorial(p)
        K = p.total_users
        n_files = K + rng.randint(0, 3)
        bits = suggest_file_bits(L, t, rng.choice((8, 64, 256)))
        placed = man_place(Library.synthetic(n_files, bits, rng.getrandbits(64)), L, t)
        demand = DemandVector(dict(zip(conn.users(), rng.sample(range(1, n_files + 1), K))))
        tx = comb_deliver(placed, p, demand)
        if mutate is not None:
            tx = corrupt(tx, placed, mutate + case)
        failed = verify_all(placed, conn, demand, tx)
        users += K
        if failed:
            bad.append((p.per_level, t, failed[:3]))
    return CheckResult("decodability", not bad, users, f"failed cases: {len(bad)} e.g. {bad[:2]}" if bad else "")


def check_sandwich(max_caches: int = 4, max_users: int = 3) -> CheckResult:
    """Acyclic-set bound <= greedy load; ensemble mean of bounds >= closed form."""
    bad, n = [], 0
    for L in range(1, max_caches + 1):
        for lam in range(L + 1):
            for K in range(1, max_users + 1):
                for t in range(L + 1):
                    bits = suggest_file_bits(L, t)
                    placed = man_place(Library.synthetic(K, bits, 99), L, t)
                    total, count = Fraction(0), 0
                    for conn in enumerate_B_lambda(L, lam, K):
                        demand = DemandVector(dict(zip(conn.users(), range(1, K + 1))))
                        lb = cv.per_connectivity_bound(conn, t)
                        greedy = measured_load(greedy_deliver(placed, conn, demand), bits)
                        n += 1
                        if lb > greedy:
                            bad.append(("sandwich", conn.to_json_obj(), t))
                        total += lb
                        count += 1
                    if total / count < cv.r_avg_lb_B_lambda(L, lam, K, t):
                        bad.append(("average", L, lam, K, t))
    return CheckResult("sandwich", not bad, n, f"failures: {bad[:3]}" if bad else "")


DEFAULT_SUITE = (
    check_hockey_stick,
    check_ensemble_sizes,
    check_counting_oracle,
    check_algebra,
    check_ensemble_average,
    check_acyclicity,
    check_convexity,
    check_ensemble_gap,
    check_tightness,
    check_sandwich,
    check_decodability,
)


def run_suite(mutate: int | None = None) -> list[CheckResult]:
    out = []
    for check in DEFAULT_SUITE:
        if check is check_decodability:
            out.append(check(mutate=mutate))
        else:
            out.append(check())
    return out
