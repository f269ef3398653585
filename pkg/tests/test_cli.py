import csv
import io
import json

import pytest

from macc_lab import checks
from macc_lab.cli import main
from macc_lab.delivery import TransmissionSet


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_example_one(capsys):
    code, out, _ = run(capsys, "simulate", "--lambda-caches", "4", "--profile", "0,0,1,0,0",
                       "--t", "2", "--synthetic", "6", "48", "7", "--format", "json")
    rep = json.loads(out)
    assert code == 0
    assert rep["load"]["exact"] == "1/6" and rep["equality"] is True
    assert rep["messages"] == 1 and rep["failed_users"] == [] and rep["decoded_users"] == 6
    assert "wall_time_s" not in rep


def test_simulate_zero_memory(capsys):
    code, out, _ = run(capsys, "simulate", "--lambda-caches", "4", "--profile", "0,0,1,0,0",
                       "--t", "0", "--synthetic", "6", "48", "7", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["load"]["exact"] == "6" and rep["equality"] is True


def test_simulate_indivisible(capsys):
    code, _, err = run(capsys, "simulate", "--lambda-caches", "4", "--profile", "0,0,1,0,0",
                       "--t", "2", "--synthetic", "6", "40", "7")
    assert code == 2
    assert "IndivisibleFileSize" in err and "48" in err


def test_suggest_b(capsys):
    code, out, _ = run(capsys, "simulate", "--lambda-caches", "5", "--profile", "0,1,0,0,0,0",
                       "--t", "2", "--synthetic", "5", "100", "1", "--suggest-B", "--format", "json")
    assert code == 0 and json.loads(out)["suggested_B"] == 160


def test_simulate_deterministic(capsys, tmp_path):
    argv = ["simulate", "--lambda-caches", "3", "--profile", "1,1,1,0", "--t", "1",
            "--synthetic", "9", "24", "3", "--demand-seed", "11"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second and first[0] == 0


def test_simulate_timing_flag(capsys):
    code, out, _ = run(capsys, "simulate", "--lambda-caches", "2", "--profile", "0,1,0",
                       "--t", "1", "--synthetic", "2", "16", "1", "--timing")
    assert code == 0 and "wall_time_s" in out


def test_simulate_connectivity_greedy(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"lambda_caches": 4, "groups": [
        {"caches": [1, 2], "count": 1}, {"caches": [2, 3], "count": 1},
        {"caches": [3, 4], "count": 1}, {"caches": [1, 4], "count": 1}]}))
    code, out, _ = run(capsys, "simulate", "--connectivity", str(path), "--t", "2",
                       "--synthetic", "4", "48", "3", "--format", "json")
    rep = json.loads(out)
    assert code == 0
    assert rep["scheme"] == "greedy-clique-cover" and rep["load_above_bound"] is True


def test_simulate_combinatorial_connectivity_file(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"lambda_caches": 2, "groups": [
        {"caches": [1], "count": 1}, {"caches": [2], "count": 1}]}))
    code, out, _ = run(capsys, "simulate", "--connectivity", str(path), "--t", "1",
                       "--synthetic", "2", "16", "3", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["scheme"] == "combinatorial" and rep["load"]["exact"] == "1/2"


def test_simulate_dump_and_demand_file(capsys, tmp_path):
    demand = tmp_path / "d.json"
    demand.write_text(json.dumps({"1#1": 3, "2#1": 1}))
    out_dir = tmp_path / "tx"
    code, _, _ = run(capsys, "simulate", "--lambda-caches", "2", "--profile", "0,1,0", "--t", "1",
                     "--synthetic", "3", "16", "5", "--demand", str(demand), "--dump-tx", str(out_dir))
    assert code == 0
    tx = TransmissionSet.load(out_dir)
    assert len(tx) == 1 and {c.file for c in tx.messages[0].constituents} == {1, 3}


def test_simulate_few_files_note(capsys):
    code, out, _ = run(capsys, "simulate", "--lambda-caches", "2", "--profile", "0,2,0", "--t", "1",
                       "--synthetic", "2", "16", "1", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["distinct_demand"] is False and "note" in rep


def test_simulate_library_dir(capsys, tmp_path):
    for i in range(2):
        (tmp_path / f"f{i}").write_bytes(bytes([i]) * 2)
    code, out, _ = run(capsys, "simulate", "--lambda-caches", "2", "--profile", "0,1,0", "--t", "1",
                       "--library-dir", str(tmp_path), "--format", "json")
    assert code == 0 and json.loads(out)["equality"] is True


@pytest.mark.parametrize("extra", [
    [],  # no topology
    ["--profile", "0,1,0", "--connectivity", "x.json"],
    ["--profile", "0,1"],
])
def test_simulate_bad_config(capsys, extra):
    code, _, _ = run(capsys, "simulate", "--lambda-caches", "2", "--t", "1",
                     "--synthetic", "2", "16", "1", *extra)
    assert code == 2


def test_simulate_bad_t(capsys):
    code, _, _ = run(capsys, "simulate", "--lambda-caches", "2", "--profile", "0,1,0", "--t", "3",
                     "--synthetic", "2", "16", "1")
    assert code == 2


def test_simulate_missing_file(capsys, tmp_path):
    code, _, _ = run(capsys, "simulate", "--connectivity", str(tmp_path / "nope.json"), "--t", "1",
                     "--synthetic", "2", "16", "1")
    assert code == 2


def test_bounds_comb_csv(capsys):
    code, out, _ = run(capsys, "bounds", "--bound", "comb", "--lambda-caches", "4", "--profile", "0,0,1,0,0")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 5
    loads = [f"{r['R_num']}/{r['R_den']}" for r in rows]
    assert loads == ["6/1", "1/1", "1/6", "0/1", "0/1"]


def test_bounds_b_lambda_json(capsys):
    code, out, _ = run(capsys, "bounds", "--bound", "b-lambda", "--lambda-caches", "3",
                       "--lam", "2", "--users", "2", "--format", "json")
    obj = json.loads(out)
    assert code == 0
    assert [c["t"] for c in obj["corners"]] == [0, 1, 2]
    assert obj["corners"][0]["R"] == "2" and obj["corners"][1]["R"] == "4/9"


def test_bounds_b(capsys):
    code, out, _ = run(capsys, "bounds", "--bound", "b", "--lambda-caches", "1", "--users", "1")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["R_num"] == "1" and rows[0]["R_den"] == "1"


def test_bounds_gap_column(capsys):
    code, out, _ = run(capsys, "bounds", "--bound", "b-lambda", "--lambda-caches", "3",
                       "--lam", "2", "--users", "3", "--gap")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert (rows[1]["gap_num"], rows[1]["gap_den"]) == ("1", "5")


def test_bounds_gap_requires_divisibility(capsys):
    code, _, err = run(capsys, "bounds", "--bound", "b-lambda", "--lambda-caches", "3",
                       "--lam", "2", "--users", "4", "--gap")
    assert code == 2 and "DivisibilityViolation" in err


def test_bounds_output_file(capsys, tmp_path):
    path = tmp_path / "curve.csv"
    code, out, _ = run(capsys, "bounds", "--bound", "b", "--lambda-caches", "2", "--users", "2",
                       "--output", str(path))
    assert code == 0 and out == "" and path.read_text().startswith("t,M_num")


@pytest.mark.parametrize("argv", [
    ["bounds", "--bound", "comb", "--lambda-caches", "2"],
    ["bounds", "--bound", "b-lambda", "--lambda-caches", "2", "--users", "2"],
    ["bounds", "--bound", "b", "--lambda-caches", "2"],
    ["bounds", "--bound", "b", "--lambda-caches", "2", "--users", "2", "--gap"],
])
def test_bounds_bad_config(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_ensemble_b_lambda(capsys):
    code, out, _ = run(capsys, "ensemble", "--lambda-caches", "3", "--lam", "2", "--users", "2",
                       "--format", "json")
    rep = json.loads(out)
    assert code == 0
    assert rep["closed_form_size"] == rep["enumerated_size"] == 6
    assert rep["counting_oracle_matches"] is True
    assert all(r["average_at_least_closed_form"] and r["sandwich_holds"] for r in rep["per_t"])


def test_ensemble_full(capsys):
    code, out, _ = run(capsys, "ensemble", "--lambda-caches", "3", "--users", "2", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["enumerated_size"] == 36 and rep["size_matches"] is True


def test_ensemble_count_only(capsys):
    code, out, _ = run(capsys, "ensemble", "--lambda-caches", "4", "--users", "4",
                       "--max-enumeration", "100", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["count_only"] is True and rep["closed_form_size"] == 3876
    assert "enumerated_size" not in rep


def test_ensemble_threads_match_serial(capsys, monkeypatch):
    argv = ["ensemble", "--lambda-caches", "3", "--lam", "1", "--users", "3", "--format", "json"]
    serial = run(capsys, *argv)
    parallel = run(capsys, *argv, "--threads", "2")
    monkeypatch.setenv("MACC_LAB_THREADS", "2")
    env = run(capsys, *argv)
    assert serial == parallel == env


def test_threads_env_validation(capsys, monkeypatch):
    monkeypatch.setenv("MACC_LAB_THREADS", "many")
    assert run(capsys, "ensemble", "--lambda-caches", "2", "--users", "1")[0] == 2


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify", "--format", "json")
    obj = json.loads(out)
    assert code == 0 and obj["passed"] is True
    names = {c["name"] for c in obj["checks"]}
    assert {"acyclicity", "convexity", "hockey-stick", "tightness"} <= names


def test_verify_mutation_detected(capsys):
    code, out, _ = run(capsys, "verify", "--mutate", "3")
    assert code == 3
    assert "decodability" in out and "FAIL" in out


def test_run_suite_reports_every_check():
    results = checks.run_suite()
    assert len(results) == len(checks.DEFAULT_SUITE)
    assert all(r.passed for r in results), [r for r in results if not r.passed]


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
