import json
import math

import numpy as np
import pytest

from assort_knap.core import InputError
from assort_knap.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentRow,
    aggregate,
    failure_fraction,
    generate_instance,
    instance_seed,
    load_config,
    profile_configs,
    read_csv,
    run_experiment,
    trajectory_seed,
    work_items,
    write_csv,
    write_outputs,
)
from assort_knap.policy import PolicyKind


def test_generator_ranges():
    """Published generator ranges: gamma_0 in (0, 0.1], A uniform on [0, 1/K]."""
    rng = np.random.default_rng(0)
    for K in (1, 3, 10):
        inst = generate_instance(10, 5, K, 128, rng)
        assert np.all(inst.gamma0 > 0) and np.all(inst.gamma0 <= 0.1)
        assert np.all(inst.consumption >= 0) and np.all(inst.consumption <= 1 / K)
        assert np.all((inst.preferences >= 0) & (inst.preferences <= 1))
        assert np.all((inst.revenues >= 0) & (inst.revenues <= 1))


def test_generator_is_deterministic():
    a = generate_instance(5, 2, 2, 64, np.random.default_rng(instance_seed(7, 5, 2, 2, 64, 0)))
    b = generate_instance(5, 2, 2, 64, np.random.default_rng(instance_seed(7, 5, 2, 2, 64, 0)))
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_generator_rejects_bad_sizes():
    with pytest.raises(InputError):
        generate_instance(2, 1, 3, 10, np.random.default_rng(0))


def test_seeds_differ_by_policy_and_trial():
    seeds = {trajectory_seed(1, k, 10, 5, 3, 64, t) for k in PolicyKind for t in range(5)}
    assert len(seeds) == 15
    assert trajectory_seed(1, PolicyKind.RESOLVING, 10, 5, 3, 64, 0) == \
        trajectory_seed(1, PolicyKind.RESOLVING, 10, 5, 3, 64, 0)


def test_config_validation():
    with pytest.raises(InputError):
        ExperimentConfig(3, 1, 1, (64, 32), 1)
    with pytest.raises(InputError):
        ExperimentConfig(3, 1, 1, (32,), 0)
    with pytest.raises(InputError):
        ExperimentConfig(3, 1, 4, (32,), 1)
    with pytest.raises(InputError):
        ExperimentConfig.from_dict({"n_products": 3, "bogus": 1})
    cfg = ExperimentConfig(3, 1, 1, [32], 2, policies=["per-epoch"])
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_profiles():
    desk = profile_configs("desk")
    assert [(c.n_products, c.n_resources, c.cardinality_cap) for c in desk] == [(10, 5, 3), (20, 10, 5)]
    assert desk[0].horizons == tuple(2 ** k for k in range(5, 14)) and desk[0].n_trials == 100
    assert len(profile_configs("full")) == 6
    with pytest.raises(InputError):
        profile_configs("huge")


def test_load_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"experiments": [
        {"n_products": 4, "n_resources": 2, "cardinality_cap": 2, "horizons": [16], "n_trials": 1}]}))
    (cfg,) = load_config(path, master_seed=5)
    assert cfg.master_seed == 5 and cfg.horizons == (16,)
    path.write_text("{not json")
    with pytest.raises(InputError):
        load_config(path)


def test_one_trial_gives_one_row_per_policy():
    cfg = ExperimentConfig(4, 2, 2, (32,), 1)
    rows = run_experiment(cfg, jobs=1)
    assert [r.policy for r in rows] == [p.value for p in cfg.policies]
    assert all(r.ok for r in rows)
    # one instance and one fluid value shared by every policy
    assert len({r.fluid_value for r in rows}) == 1
    for r in rows:
        assert r.regret == pytest.approx(r.T * r.fluid_value - r.revenue)
    assert len(work_items(ExperimentConfig(4, 2, 2, (32, 64), 3))) == 6


def test_parallel_rows_match_serial():
    cfg = ExperimentConfig(5, 2, 2, (32, 64), 3, master_seed=9)
    assert run_experiment(cfg, jobs=1) == run_experiment(cfg, jobs=2)


def row(policy, T, revenue, regret, status="ok"):
    return ExperimentRow(policy, 2, 1, 1, T, 0, 0, revenue, (revenue + regret) / T, regret, 1, status)


def test_aggregate_single_and_equal_rows():
    (a,) = aggregate([row("resolving", 10, 3.0, 1.0)])
    assert (a.mean_revenue, a.se_revenue, a.count) == (3.0, 0.0, 1)
    (a,) = aggregate([row("resolving", 10, 3.0, 1.0)] * 2)
    assert a.se_revenue == 0.0 and a.se_regret == 0.0


def test_aggregate_closed_form():
    vals = [1.0, 2.0, 4.0, 9.0]
    rows = [row("resolving", 10, v, 10 - v) for v in vals]
    rows.append(row("resolving", 10, 100.0, 0.0, status="solver_failure"))
    (a,) = aggregate(rows)
    mean = 4.0
    se = math.sqrt(sum((v - mean) ** 2 for v in vals) / 3) / 2
    assert a.count == 4 and a.mean_revenue == mean
    assert a.se_revenue == pytest.approx(se) and a.se_regret == pytest.approx(se)
    assert a.revenue_gap == pytest.approx(0.6)
    assert failure_fraction(rows) == pytest.approx(0.2)


def test_aggregate_groups_by_policy_and_horizon():
    rows = [row("resolving", 10, 1, 1), row("per-epoch", 10, 1, 1), row("resolving", 20, 1, 1)]
    keys = [(a.policy, a.T) for a in aggregate(rows)]
    assert keys == sorted(keys) and len(keys) == 3
    with pytest.raises(InputError):
        aggregate([])


def test_csv_roundtrip_and_columns(tmp_path):
    rows = run_experiment(ExperimentConfig(4, 2, 2, (32,), 2), jobs=1)
    path = tmp_path / "r.csv"
    write_csv(rows, path)
    assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert read_csv(path) == rows


def test_write_outputs(tmp_path):
    cfg = ExperimentConfig(4, 2, 2, (32, 64), 2)
    rows = run_experiment(cfg, jobs=1)
    paths = write_outputs(rows, tmp_path / "out", [cfg], {"jobs": 1})
    dat = paths["dat"].read_text()
    assert dat.count("# policy=") == 3 and "\n\n\n" in dat
    meta = json.loads(paths["meta"].read_text())
    assert meta["rows"] == len(rows) and meta["configs"][0]["n_products"] == 4
