"""Acceptance criteria, each at its stated scale and with exact equality.

Every test records one ``PASS``/``FAIL`` line, printed in the pytest
terminal summary (and directly when run as a script).
"""
import itertools
import random
import time
from fractions import Fraction

import pytest

from macc_lab import converse as cv
from macc_lab.caching import Library, man_place, suggest_file_bits
from macc_lab.combinatorics import all_subsets, binomial, permutations, subsets
from macc_lab.delivery import (
    DemandVector,
    comb_deliver,
    corrupt,
    greedy_deliver,
    measured_load,
    verify_all,
)
from macc_lab.topology import (
    CombProfile,
    Connectivity,
    build_combinatorial,
    enumerate_B,
    enumerate_B_lambda,
    ensemble_size,
)

from conftest import ACCEPTANCE_LINES


def report(number: int, title: str, failures: list, cases: int, started: float) -> None:
    status = "PASS" if not failures else "FAIL"
    line = f"[{status}] criterion {number}: {title} ({cases} cases, {time.perf_counter() - started:.1f}s)"
    if failures:
        line += f" first failures: {failures[:3]}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failures, line


def tightness_profiles(L: int) -> list[CombProfile]:
    rng = random.Random(L)
    chosen = {tuple(int(j == 2) for j in range(L + 1))}
    if L >= 2:
        chosen.add(tuple([1, 2, 1] + [0] * (L - 2)))
    for lam in range(L + 1):
        chosen.add(tuple(int(j == lam) for j in range(L + 1)))
    while len(chosen) < 12:
        levels = tuple(rng.choice((0, 0, 1, 2)) for _ in range(L + 1))
        if 0 < CombProfile(L, levels).total_users <= 40:
            chosen.add(levels)
    return [CombProfile(L, lv) for lv in sorted(chosen)]


def test_1_tightness():
    started, bad, n = time.perf_counter(), [], 0
    for L in range(2, 6):
        profs = tightness_profiles(L)
        assert len(profs) >= 10
        for p in profs:
            conn = build_combinatorial(p)
            K = p.total_users
            for t in range(L + 1):
                bits = suggest_file_bits(L, t)
                placed = man_place(Library.synthetic(K, bits, 17 * L + t), L, t)
                demand = DemandVector(dict(zip(conn.users(), range(1, K + 1))))
                tx = comb_deliver(placed, p, demand)
                load = measured_load(tx, bits)
                n += 1
                if not load == cv.r_comb_lb(p, t) == cv.per_connectivity_bound(conn, t):
                    bad.append((p.per_level, t, load))
                if verify_all(placed, conn, demand, tx):
                    bad.append((p.per_level, t, "decode"))
    ex1 = CombProfile(4, (0, 0, 1, 0, 0))
    spots = {1: Fraction(1), 2: Fraction(1, 6), 3: Fraction(0)}
    for t, want in spots.items():
        if cv.r_comb_lb(ex1, t) != want:
            bad.append(("spot", t))
    if cv.r_comb_lb(CombProfile(4, (2, 0, 1, 0, 0)), 3) != 2:
        bad.append(("spot K_0", 3))
    report(1, "simulated load = closed form = acyclic-set bound", bad, n, started)


def test_2_decodability():
    started, rng = time.perf_counter(), random.Random(2024)
    bad, users, cases, detected = [], 0, 0, 0
    while cases < 200:
        L = rng.randint(1, 5)
        t = rng.randint(0, L)
        levels = tuple(rng.choice((0, 1, 1, 2)) for _ in range(L + 1))
        p = CombProfile(L, levels)
        K = p.total_users
        if not 0 < K <= 40:
            continue
        cases += 1
        conn = build_combinatorial(p)
        n_files = K + rng.randint(0, 4)
        bits = suggest_file_bits(L, t, rng.choice((8, 64, 512)))
        placed = man_place(Library.synthetic(n_files, bits, rng.getrandbits(64)), L, t)
        demand = DemandVector(dict(zip(conn.users(), rng.sample(range(1, n_files + 1), K))))
        tx = comb_deliver(placed, p, demand)
        failed = verify_all(placed, conn, demand, tx)
        users += K
        if failed:
            bad.append((levels, t, failed[:2]))
        # fault injection on every case that actually sends a coded message
        if any(len(m.constituents) > 1 for m in tx.messages):
            if verify_all(placed, conn, demand, corrupt(tx, placed, cases)):
                detected += 1
            else:
                bad.append((levels, t, "corruption undetected"))
    if detected == 0:
        bad.append("fault injection never exercised")
    report(2, f"bit-exact decoding for {users} users; {detected} injected faults detected", bad, cases, started)


def test_3_acyclicity():
    started, bad, n = time.perf_counter(), [], 0
    for L in range(1, 5):
        perms = list(permutations(L))
        for K in (1, 2):
            for conn in enumerate_B(L, K):
                users = conn.users()
                for files in itertools.permutations(range(1, K + 1)):
                    demand = DemandVector(dict(zip(users, files)))
                    for t in (None, *range(L + 1)):
                        graph = cv.build_side_info_graph(conn, demand, t)
                        for perm in perms:
                            n += 1
                            if not cv.is_acyclic(graph, cv.acyclic_set(conn, demand, perm, t)):
                                bad.append((conn.to_json_obj(), perm, t))
    rng = random.Random(3)
    for _ in range(150):
        L = rng.randint(2, 5)
        K = rng.randint(3, 6)
        states = all_subsets(L)
        counts: dict = {}
        for _ in range(K):
            s = rng.choice(states)
            counts[s] = counts.get(s, 0) + 1
        conn = Connectivity.from_counts(L, counts)
        demand = DemandVector(dict(zip(conn.users(), rng.sample(range(1, 3 * K), K))))
        t = rng.choice([None, rng.randint(0, L)])
        graph = cv.build_side_info_graph(conn, demand, t)
        perm = tuple(rng.sample(range(1, L + 1), L))
        n += 1
        if not cv.is_acyclic(graph, cv.acyclic_set(conn, demand, perm, t)):
            bad.append((conn.to_json_obj(), perm, t))
    report(3, "permutation-built vertex sets are acyclic", bad, n, started)


def test_4_algebra():
    started, bad, n = time.perf_counter(), [], 0
    for L in range(1, 6):
        for K in range(1, 7):
            for t in range(L + 1):
                n += 1
                if cv.avg_bound_unsimplified(L, K, t) != cv.r_avg_lb_B(L, K, t):
                    bad.append((L, K, t, "B"))
                if cv.r_avg_lb_B(L, K, t) != cv.r_avg_lb_B(L, K, t, full_range=True):
                    bad.append((L, K, t, "B range"))
                for lam in range(L + 1):
                    n += 1
                    if cv.avg_bound_unsimplified(L, K, t, lam) != cv.r_avg_lb_B_lambda(L, lam, K, t):
                        bad.append((L, K, t, lam))
    report(4, "raw counting sums equal simplified closed forms", bad, n, started)


def test_5_counting_oracle():
    started, bad, n = time.perf_counter(), [], 0
    for L in range(1, 5):
        for K in range(1, 5):
            full = list(enumerate_B(L, K))
            closed = cv.counting_closed_form(L, K)
            for u in all_subsets(L):
                n += 1
                if sum(c.count(u) for c in full) != closed:
                    bad.append((L, K, u, "B"))
            for lam in range(L + 1):
                closed = cv.counting_closed_form(L, K, lam)
                for u in subsets(L, lam):
                    n += 1
                    if cv.ensemble_counting_oracle(L, K, u, lam) != closed:
                        bad.append((L, K, u, lam))
    report(5, "enumerated per-subset user totals equal composition sums", bad, n, started)


def test_6_ensemble_sizes():
    started, bad, n = time.perf_counter(), [], 0
    for L in range(1, 5):
        for K in range(1, 5):
            n += 1
            if sum(1 for _ in enumerate_B(L, K)) != binomial(K + 2**L - 1, K) or ensemble_size(L, K) != binomial(K + 2**L - 1, K):
                bad.append((L, K, "B"))
            for lam in range(L + 1):
                n += 1
                want = binomial(K + binomial(L, lam) - 1, K)
                if sum(1 for _ in enumerate_B_lambda(L, lam, K)) != want or ensemble_size(L, K, lam) != want:
                    bad.append((L, K, lam))
    report(6, "ensemble sizes match weak-composition counts", bad, n, started)


def test_7_ensemble_gap():
    started, bad, n = time.perf_counter(), [], 0
    for L in range(1, 7):
        for lam in range(1, L + 1):
            for mult in (1, 2, 3):
                K = mult * binomial(L, lam)
                for t in range(L - lam + 1):
                    n += 1
                    gap = cv.ensemble_gap(L, lam, K, t)
                    at = cv.a_t(L, lam, K, t)
                    if gap != at or (t >= 1 and not at > 0):
                        bad.append((L, lam, K, t))
    report(7, "ensemble-vs-combinatorial gap equals A_t and is positive", bad, n, started)


def _convex_decreasing(vals):
    return all(d >= 0 for d in cv.second_differences(vals)) and all(a >= b for a, b in zip(vals, vals[1:]))


def test_8_convexity():
    started, bad, n = time.perf_counter(), [], 0
    rng = random.Random(8)
    for L in range(1, 13):
        shapes = {tuple(int(j == lam) for j in range(L + 1)) for lam in range(L + 1)}
        while len(shapes) < L + 21:
            shapes.add(tuple(rng.randint(0, 4) for _ in range(L + 1)))
        for levels in sorted(shapes):
            p = CombProfile(L, levels)
            vals = [cv.f_comb(p, t) for t in range(L + 1)]
            n += 1
            if not _convex_decreasing(vals) or vals[0] != p.total_users or vals[-1] != levels[0]:
                bad.append(("comb", levels))
        for K in range(1, 9):
            for lam in range(L + 1):
                n += 2
                if not _convex_decreasing([cv.r_avg_lb_B_lambda(L, lam, K, t) for t in range(L + 1)]):
                    bad.append(("B_lambda", L, lam, K))
                if not _convex_decreasing([cv.b_summand(L, K, t, lam) for t in range(L + 1)]):
                    bad.append(("B summand", L, lam, K))
    report(8, "objective families convex and non-increasing up to 12 caches", bad, n, started)


def test_9_sandwich():
    started, bad, n = time.perf_counter(), [], 0
    for L in range(1, 5):
        for lam in range(L + 1):
            for K in range(1, 4):
                for t in range(L + 1):
                    bits = suggest_file_bits(L, t)
                    placed = man_place(Library.synthetic(K, bits, 9), L, t)
                    bounds = []
                    for conn in enumerate_B_lambda(L, lam, K):
                        demand = DemandVector(dict(zip(conn.users(), range(1, K + 1))))
                        lb = cv.per_connectivity_bound(conn, t)
                        tx = greedy_deliver(placed, conn, demand)
                        n += 1
                        if lb > measured_load(tx, bits):
                            bad.append(("sandwich", conn.to_json_obj(), t))
                        bounds.append(lb)
                    if sum(bounds, Fraction(0)) / len(bounds) < cv.r_avg_lb_B_lambda(L, lam, K, t):
                        bad.append(("average", L, lam, K, t))
    report(9, "acyclic bound <= greedy load; ensemble mean >= closed form", bad, n, started)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
