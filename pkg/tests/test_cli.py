import csv
import json

import pytest

from assort_knap.cli import main


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.json"
    assert main(["gen", "--n", "5", "--m", "2", "--k", "2", "--t", "64", "--seed", "3",
                 "--out", str(path)]) == 0
    return path


def test_gen_and_solve_fluid(instance_file, capsys):
    capsys.readouterr()
    assert main(["solve-fluid", "--instance", str(instance_file), "--epsilon", "0.001"]) == 0
    out = dict(line.split(" ", 1) for line in capsys.readouterr().out.splitlines())
    assert out["lp_solves"] == "10"
    assert len(out["x_fluid"].split(",")) == 5
    assert float(out["lemma1_discrepancy"]) <= 0.001 + 1e-6


def test_simulate_with_trace(instance_file, tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    capsys.readouterr()
    assert main(["simulate", "--instance", str(instance_file), "--policy", "resolving",
                 "--seed", "4", "--trace", str(trace)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["policy"] == "resolving" and summary["termination"] in ("horizon", "inventory_depleted")
    with open(trace) as fh:
        recs = list(csv.DictReader(fh))
    assert sum(int(r["m_tau"]) for r in recs) == summary["periods_used"]
    assert "gamma_tau_2" in recs[0]


def test_decompose_one_based(capsys):
    assert main(["decompose", "--x", "0.5,0.5", "--k", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "0.5\t{1}" and lines[1] == "0.5\t{2}"
    assert "max_marginal_error 0.0" in lines[2]


def test_bad_input_exit_code(capsys):
    assert main(["decompose", "--x", "0.9,0.9", "--k", "1"]) == 2
    assert main(["decompose", "--x", "a,b", "--k", "1"]) == 2
    assert main(["solve-fluid", "--instance", "/nonexistent.json"]) == 2


def test_experiment_small_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_products": 4, "n_resources": 2, "cardinality_cap": 2,
                               "horizons": [16, 32], "n_trials": 2}))
    out = tmp_path / "res"
    assert main(["experiment", "--config", str(cfg), "--jobs", "1", "--out", str(out), "--quiet"]) == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 3
    assert (out / "aggregate.dat").exists() and (out / "run.json").exists()


def test_experiment_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_products": 4, "horizons": []}))
    assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
