"""``macc-lab`` command line front-end.

Every subcommand writes a deterministic report (text, JSON or CSV) to
stdout or ``--output``. Exit codes: 0 success, 2 bad input, 3 a checked
property failed (decoding, load equality, invariant suite).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import __version__
from . import checks
from . import converse as cv
from .caching import Library, man_place, suggest_file_bits
from .combinatorics import all_subsets, subsets
from .delivery import (
    DemandVector,
    comb_deliver,
    distinct_demand,
    greedy_deliver,
    measured_load,
    verify_all,
)
from .errors import MaccError, TooLarge, ValidationError
from .topology import (
    CombProfile,
    Connectivity,
    build_combinatorial,
    enumerate_B,
    enumerate_B_lambda,
    ensemble_size,
    membership,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VIOLATION = 3


def _frac(x: Fraction) -> dict:
    return {"exact": str(x), "decimal": f"{float(x):.12g}"}


def _emit(args, text: str) -> None:
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"
    lines = []
    for key, value in report.items():
        if isinstance(value, dict) and set(value) == {"exact", "decimal"}:
            value = f"{value['exact']} ({value['decimal']})"
        elif isinstance(value, (list, dict)):
            value = json.dumps(value)
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MACC_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"MACC_LAB_THREADS must be an integer, got {env!r}") from None
    return 1


def _pmap(fn, items, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * threads))))


# simulate -------------------------------------------------------------------


def _topology(args) -> tuple[Connectivity, CombProfile | None]:
    if (args.profile is None) == (args.connectivity is None):
        raise ValidationError("give exactly one of --profile or --connectivity")
    if args.profile is not None:
        if args.lambda_caches is None:
            raise ValidationError("--profile needs --lambda-caches")
        profile = CombProfile.parse(args.lambda_caches, args.profile)
        return build_combinatorial(profile), profile
    conn = Connectivity.load(args.connectivity)
    if args.lambda_caches is not None and args.lambda_caches != conn.caches:
        raise ValidationError(
            f"--lambda-caches {args.lambda_caches} disagrees with connectivity file ({conn.caches})"
        )
    return conn, membership(conn).profile


def _demand(args, conn: Connectivity, n_files: int) -> tuple[DemandVector, str | None]:
    if args.demand:
        demand = DemandVector.load(args.demand)
        demand.check_covers(conn, n_files)
        return demand, None
    users = conn.users()
    if n_files < len(users):
        files = [(i % n_files) + 1 for i in range(len(users))]
        note = f"N = {n_files} < K = {len(users)}: demands repeat cyclically"
        return DemandVector(dict(zip(users, files))), note
    return distinct_demand(conn, n_files, args.demand_seed), None


def cmd_simulate(args) -> int:
    conn, profile = _topology(args)
    L, t = conn.caches, args.t
    if not 0 <= t <= L:
        raise ValidationError(f"--t must lie in [0, {L}], got {t}")
    if (args.synthetic is None) == (args.library_dir is None):
        raise ValidationError("give exactly one of --synthetic or --library-dir")
    if args.suggest_B:
        at_least = args.synthetic[1] if args.synthetic else 0
        _emit(args, _render({"lambda_caches": L, "t": t,
                             "suggested_B": suggest_file_bits(L, t, at_least)}, args.format))
        return EXIT_OK

    start = time.perf_counter()
    if args.synthetic:
        n_files, bits, seed = args.synthetic
        library = Library.synthetic(n_files, bits, seed)
    else:
        library = Library.from_directory(args.library_dir)
    placed = man_place(library, L, t)
    demand, note = _demand(args, conn, library.files)

    if profile is not None:
        scheme = "combinatorial"
        tx = comb_deliver(placed, profile, demand)
        bound = cv.r_comb_lb(profile, t)
        bound_name = "corner_value"
    else:
        scheme = "greedy-clique-cover"
        tx = greedy_deliver(placed, conn, demand)
        bound = cv.per_connectivity_bound(conn, t) if L <= cv.MAX_PERMUTATION_CACHES else None
        bound_name = "per_connectivity_bound"
    failed = verify_all(placed, conn, demand, tx)
    if args.dump_tx:
        tx.save(args.dump_tx)
    load = measured_load(tx, library.bits)

    report: dict = {
        "scheme": scheme,
        "lambda_caches": L,
        "t": t,
        "users": conn.total_users,
        "files": library.files,
        "file_bits": library.bits,
        "memory": str(placed.memory),
        "messages": len(tx),
        "load": _frac(load),
        bound_name: None if bound is None else _frac(bound),
    }
    ok = not failed
    if profile is not None:
        report["equality"] = load == bound
        ok = ok and load == bound
    elif bound is not None:
        report["load_above_bound"] = load >= bound
        ok = ok and (load >= bound or not demand.distinct)
    report["decoded_users"] = conn.total_users - len(failed)
    report["failed_users"] = failed
    report["distinct_demand"] = demand.distinct
    if not demand.distinct:
        note = (note + "; " if note else "") + "bounds assume distinct demands; comparison is informational"
    if profile is None and bound is not None:
        report["bound_note"] = "uniform subfile split; value is the same for every distinct demand"
    if note:
        report["note"] = note
    if args.timing:
        report["wall_time_s"] = round(time.perf_counter() - start, 6)
    _emit(args, _render(report, args.format))
    return EXIT_OK if ok else EXIT_VIOLATION


# bounds ---------------------------------------------------------------------


def cmd_bounds(args) -> int:
    L = args.lambda_caches
    gap = None
    if args.gap and args.bound != "b-lambda":
        raise ValidationError("--gap is only defined for --bound b-lambda")
    if args.files is not None and args.files < 1:
        raise ValidationError("--files must be positive")
    if args.bound == "comb":
        if args.profile is None:
            raise ValidationError("--bound comb needs --profile")
        profile = CombProfile.parse(L, args.profile)
        files = args.files if args.files is not None else profile.total_users
        c = cv.comb_curve(profile, files)
    else:
        if args.users is None:
            raise ValidationError(f"--bound {args.bound} needs --users")
        files = args.files if args.files is not None else args.users
        if args.bound == "b-lambda":
            if args.lam is None or not 0 <= args.lam <= L:
                raise ValidationError(f"--bound b-lambda needs --lam in [0, {L}]")
            c = cv.b_lambda_curve(L, args.lam, args.users, files)
            if args.gap:
                gap = {p.t: cv.ensemble_gap(L, args.lam, args.users, p.t)
                       for p in c.corners if p.t <= L - args.lam}
        else:
            c = cv.b_curve(L, args.users, files)
    if args.format == "json":
        obj = c.to_json_obj()
        obj["bound"] = args.bound
        if gap is not None:
            for corner in obj["corners"]:
                g = gap.get(corner["t"])
                corner["gap"] = None if g is None else str(g)
        text = json.dumps(obj, indent=2) + "\n"
    else:
        text = c.to_csv(gap) if gap is not None else c.to_csv()
    _emit(args, text)
    return EXIT_OK


# ensemble -------------------------------------------------------------------


def _sandwich_one(job) -> tuple:
    """Bounds and greedy loads of one ensemble member for every t."""
    obj, ts = job
    conn = Connectivity.from_json_obj(obj)
    K = conn.total_users
    demand = DemandVector(dict(zip(conn.users(), range(1, K + 1))))
    out = []
    for t in ts:
        bits = suggest_file_bits(conn.caches, t)
        placed = man_place(Library.synthetic(K, bits, 0), conn.caches, t)
        lb = cv.per_connectivity_bound(conn, t)
        greedy = measured_load(greedy_deliver(placed, conn, demand), bits)
        out.append((lb, greedy))
    return tuple(out)


def cmd_ensemble(args) -> int:
    L, K, lam = args.lambda_caches, args.users, args.lam
    if L < 1 or K < 1:
        raise ValidationError("--lambda-caches and --users must be positive")
    if lam is not None and not 0 <= lam <= L:
        raise ValidationError(f"--lam must lie in [0, {L}]")
    size = ensemble_size(L, K, lam)
    report: dict = {
        "ensemble": "B" if lam is None else f"B_{lam}",
        "lambda_caches": L,
        "users": K,
        "closed_form_size": size,
    }
    if size > args.max_enumeration:
        report["count_only"] = True
        report["reason"] = str(TooLarge("ensemble", size, args.max_enumeration))
        _emit(args, _render(report, args.format))
        return EXIT_OK

    start = time.perf_counter()
    members = list(enumerate_B(L, K) if lam is None else enumerate_B_lambda(L, lam, K))
    report["enumerated_size"] = len(members)
    report["size_matches"] = len(members) == size
    ok = len(members) == size

    closed = cv.counting_closed_form(L, K, lam)
    pool = all_subsets(L) if lam is None else subsets(L, lam)
    counting_ok = all(sum(c.count(u) for c in members) == closed for u in pool)
    report["counting_closed_form"] = closed
    report["counting_oracle_matches"] = counting_ok
    ok = ok and counting_ok

    if L > cv.MAX_PERMUTATION_CACHES:
        report["bounds_skipped"] = f"permutation scan needs lambda_caches <= {cv.MAX_PERMUTATION_CACHES}"
    else:
        top = L if lam is None else min(L, L - lam + 1)
        ts = list(range(top + 1))
        rows = _pmap(_sandwich_one, [(m.to_json_obj(), ts) for m in members], _threads(args))
        per_t = []
        for j, t in enumerate(ts):
            lbs = [r[j][0] for r in rows]
            gaps = [r[j][1] - r[j][0] for r in rows]
            avg = sum(lbs, Fraction(0)) / len(lbs)
            closed_form = cv.r_avg_lb_B(L, K, t) if lam is None else cv.r_avg_lb_B_lambda(L, lam, K, t)
            sandwiched = all(g >= 0 for g in gaps)
            per_t.append({
                "t": t,
                "average_bound": str(avg),
                "closed_form": str(closed_form),
                "average_at_least_closed_form": avg >= closed_form,
                "sandwich_holds": sandwiched,
                "min_greedy_gap": str(min(gaps)),
                "max_greedy_gap": str(max(gaps)),
            })
            ok = ok and sandwiched and avg >= closed_form
        report["per_t"] = per_t
    if args.timing:
        report["wall_time_s"] = round(time.perf_counter() - start, 6)
    _emit(args, _render(report, args.format))
    return EXIT_OK if ok else EXIT_VIOLATION


# verify ---------------------------------------------------------------------


def _run_check(job):
    idx, mutate = job
    check = checks.DEFAULT_SUITE[idx]
    return check(mutate=mutate) if check is checks.check_decodability else check()


def cmd_verify(args) -> int:
    jobs = [(i, args.mutate) for i in range(len(checks.DEFAULT_SUITE))]
    start = time.perf_counter()
    results = _pmap(_run_check, jobs, _threads(args))
    ok = all(r.passed for r in results)
    if args.format == "json":
        obj: dict = {
            "passed": ok,
            "checks": [{"name": r.name, "passed": r.passed, "cases": r.cases, "detail": r.detail}
                       for r in results],
        }
        if args.timing:
            obj["wall_time_s"] = round(time.perf_counter() - start, 6)
        text = json.dumps(obj, indent=2) + "\n"
    else:
        width = max(len(r.name) for r in results)
        lines = [f"{'check':<{width}}  status  cases  detail"]
        for r in results:
            lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.cases:>5}  {r.detail}")
        lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
        if args.timing:
            lines.append(f"wall_time_s: {time.perf_counter() - start:.6f}")
        text = "\n".join(lines) + "\n"
    _emit(args, text)
    return EXIT_OK if ok else EXIT_VIOLATION


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--max-enumeration", type=int, default=10**6,
                        help="cap on enumerated ensemble size (default 10^6)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes for scans (env MACC_LAB_THREADS)")
    common.add_argument("--timing", action="store_true", help="include wall time in the report")

    parser = argparse.ArgumentParser(prog="macc-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="place, deliver, decode and measure load")
    sim.add_argument("--lambda-caches", type=int)
    sim.add_argument("--profile", help="per-level user counts K_0,...,K_L")
    sim.add_argument("--connectivity", help="connectivity JSON file")
    sim.add_argument("--t", type=int, required=True)
    sim.add_argument("--synthetic", type=int, nargs=3, metavar=("N", "B", "SEED"))
    sim.add_argument("--library-dir")
    sim.add_argument("--demand", help="demand JSON file {user label: file}")
    sim.add_argument("--demand-seed", type=int, help="random distinct demand instead of user i -> file i")
    sim.add_argument("--suggest-B", action="store_true", help="print the least compatible file size and exit")
    sim.add_argument("--dump-tx", metavar="DIR", help="save manifest.json and payload.bin")
    sim.add_argument("--format", choices=("text", "json"), default="text")
    sim.set_defaults(func=cmd_simulate)

    bnd = sub.add_parser("bounds", parents=[common], help="emit a lower-bound curve")
    bnd.add_argument("--bound", choices=("comb", "b-lambda", "b"), required=True,
                     help="comb: combinatorial optimum; b-lambda / b: fixed-degree / full ensemble average")
    bnd.add_argument("--lambda-caches", type=int, required=True)
    bnd.add_argument("--profile")
    bnd.add_argument("--lam", type=int)
    bnd.add_argument("--users", type=int)
    bnd.add_argument("--files", type=int, help="library size N (default: number of users)")
    bnd.add_argument("--gap", action="store_true", help="add the ensemble-vs-combinatorial gap column")
    bnd.add_argument("--format", choices=("csv", "json"), default="csv")
    bnd.set_defaults(func=cmd_bounds)

    ens = sub.add_parser("ensemble", parents=[common], help="enumerate an ensemble and cross-check")
    ens.add_argument("--lambda-caches", type=int, required=True)
    ens.add_argument("--users", type=int, required=True)
    ens.add_argument("--lam", type=int, help="fixed access degree; omit for the full ensemble")
    ens.add_argument("--format", choices=("text", "json"), default="text")
    ens.set_defaults(func=cmd_ensemble)

    ver = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    ver.add_argument("--mutate", type=int, metavar="SEED", help="corrupt one message per decoding case")
    ver.add_argument("--format", choices=("text", "json"), default="text")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except MaccError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
