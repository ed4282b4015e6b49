"""Instance generation and batched regret experiments.

Every (T, trial) pair gets one instance shared by all policies; every
(policy, T, trial) gets its own trajectory seed. Both are derived from the
master seed through ``numpy.random.SeedSequence`` spawn keys, so results do
not depend on how work is scheduled across processes.
"""
from __future__ import annotations

import csv
import json
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import InputError, ModelInstance
from .fluid import fluid_benchmark
from .linprog import SolverError
from .policy import PolicyKind
from .sim import SimulationError, run_trajectory

CSV_COLUMNS = ("policy", "N", "M", "K", "T", "trial", "seed", "revenue", "fluid_value",
               "regret", "epochs_completed", "status")
ALL_POLICIES = (PolicyKind.RESOLVING, PolicyKind.SAMPLING_PER_PERIOD, PolicyKind.SAMPLING_PER_EPOCH)
FAILURE_LIMIT = 0.01

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def generate_instance(N: int, M: int, K: int, T: int, rng) -> ModelInstance:
    """Random instance: v ~ U[0,1], C0/T ~ U[0,0.1], A ~ U[0,1/K], r ~ U[0,1] (drawn in that order)."""
    if min(N, M, K, T) < 1 or K > N:
        raise InputError(f"need positive N, M, K, T with K <= N, got {(N, M, K, T)}")
    v = rng.uniform(0.0, 1.0, N)
    gamma = rng.uniform(0.0, 0.1, M)
    # a zero draw has probability zero but would break C0 > 0
    gamma = np.where(gamma > 0.0, gamma, np.nextafter(0.0, 1.0))
    A = rng.uniform(0.0, 1.0 / K, (N, M))
    r = rng.uniform(0.0, 1.0, N)
    return ModelInstance(N, M, K, T, r, v, A, gamma * T)


def instance_seed(master_seed: int, N: int, M: int, K: int, T: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(0, N, M, K, T, trial))


def trajectory_seed(master_seed: int, policy: PolicyKind, N: int, M: int, K: int, T: int, trial: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=(1, policy.code, N, M, K, T, trial))
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    n_products: int
    n_resources: int
    cardinality_cap: int
    horizons: tuple
    n_trials: int
    policies: tuple = ALL_POLICIES
    master_seed: int = 2024
    output_path: str | None = None

    def __post_init__(self):
        horizons = tuple(int(h) for h in self.horizons)
        if not horizons or any(h < 1 for h in horizons):
            raise InputError("horizons must be a nonempty list of positive integers")
        if list(horizons) != sorted(horizons):
            raise InputError("horizons must be sorted ascending")
        if int(self.n_trials) < 1:
            raise InputError("n_trials must be >= 1")
        N, M, K = int(self.n_products), int(self.n_resources), int(self.cardinality_cap)
        if min(N, M, K) < 1 or K > N:
            raise InputError(f"invalid sizes N={N}, M={M}, K={K}")
        policies = tuple(PolicyKind.parse(p) for p in self.policies)
        if not policies:
            raise InputError("at least one policy is required")
        object.__setattr__(self, "horizons", horizons)
        object.__setattr__(self, "policies", policies)
        object.__setattr__(self, "n_products", N)
        object.__setattr__(self, "n_resources", M)
        object.__setattr__(self, "cardinality_cap", K)
        object.__setattr__(self, "n_trials", int(self.n_trials))
        object.__setattr__(self, "master_seed", int(self.master_seed))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["horizons"] = list(self.horizons)
        out["policies"] = [p.value for p in self.policies]
        return out


def _powers(lo, hi):
    return tuple(2 ** k for k in range(lo, hi + 1))


def profile_configs(name: str, master_seed: int = 2024) -> list:
    """Built-in experiment sets: 'desk' (minutes) and 'full' (hours)."""
    if name == "desk":
        sizes = [(10, 5, 3), (20, 10, 5)]
        return [ExperimentConfig(N, M, K, _powers(5, 13), 100, master_seed=master_seed)
                for N, M, K in sizes]
    if name == "full":
        sizes = [(10, M, 3) for M in (5, 10, 15)] + [(20, M, 5) for M in (10, 20, 30)]
        return [ExperimentConfig(N, M, K, _powers(5, 15), 500, master_seed=master_seed)
                for N, M, K in sizes]
    raise InputError(f"unknown profile {name!r}; expected desk or full")


def load_config(path, master_seed: int | None = None) -> list:
    """JSON object with ExperimentConfig fields, or {"experiments": [...]}."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    items = data.get("experiments", [data]) if isinstance(data, dict) else None
    if not isinstance(items, list) or not all(isinstance(d, dict) for d in items):
        raise InputError("config must be an object or {\"experiments\": [objects]}")
    configs = []
    for item in items:
        if master_seed is not None:
            item = dict(item, master_seed=master_seed)
        configs.append(ExperimentConfig.from_dict(item))
    return configs


@dataclass(frozen=True)
class ExperimentRow:
    policy: str
    N: int
    M: int
    K: int
    T: int
    trial: int
    seed: int
    revenue: float
    fluid_value: float
    regret: float
    epochs_completed: int
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_list(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


def _run_item(item):
    """One (config, T, trial): build the shared instance and run every policy."""
    config, T, trial = item
    N, M, K = config.n_products, config.n_resources, config.cardinality_cap
    rng = np.random.default_rng(instance_seed(config.master_seed, N, M, K, T, trial))
    instance = generate_instance(N, M, K, T, rng)
    rows = []
    try:
        phi = fluid_benchmark(instance)
    except SolverError as exc:
        phi = None
        fluid_error = f"solver_failure: {exc}"
    for policy in config.policies:
        seed = trajectory_seed(config.master_seed, policy, N, M, K, T, trial)
        base = dict(policy=policy.value, N=N, M=M, K=K, T=T, trial=trial, seed=seed)
        if phi is None:
            rows.append(ExperimentRow(**base, revenue=math.nan, fluid_value=math.nan,
                                      regret=math.nan, epochs_completed=0, status=fluid_error))
            continue
        try:
            res = run_trajectory(instance, policy, seed, fluid_value=phi, record_traces=False)
        except (SolverError, SimulationError) as exc:
            kind = "solver_failure" if isinstance(exc, SolverError) else "simulation_failure"
            rows.append(ExperimentRow(**base, revenue=math.nan, fluid_value=phi, regret=math.nan,
                                      epochs_completed=0, status=f"{kind}: {exc}"))
            continue
        rows.append(ExperimentRow(**base, revenue=res.total_revenue, fluid_value=phi,
                                  regret=T * phi - res.total_revenue,
                                  epochs_completed=res.epochs_completed))
    return rows


def work_items(config: ExperimentConfig) -> list:
    return [(config, T, trial) for T in config.horizons for trial in range(config.n_trials)]


def default_jobs() -> int:
    return os.cpu_count() or 1


def run_experiment(config, jobs: int | None = None, progress=None) -> list:
    """Rows for every (T, trial, policy) of one or more configs, in a fixed order.

    ``jobs`` > 1 spreads work items over a process pool; ``map`` keeps the
    results in submission order.
    """
    configs = [config] if isinstance(config, ExperimentConfig) else list(config)
    items = [it for cfg in configs for it in work_items(cfg)]
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    rows = []
    if jobs == 1:
        results = map(_run_item, items)
        for k, chunk in enumerate(results):
            rows.extend(chunk)
            if progress:
                progress(k + 1, len(items))
        return rows
    chunksize = max(1, len(items) // (jobs * 8))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for k, chunk in enumerate(pool.map(_run_item, items, chunksize=chunksize)):
            rows.extend(chunk)
            if progress:
                progress(k + 1, len(items))
    return rows


def failure_fraction(rows) -> float:
    if not rows:
        return 0.0
    return sum(not r.ok for r in rows) / len(rows)


@dataclass(frozen=True)
class AggregateRow:
    policy: str
    N: int
    M: int
    K: int
    T: int
    count: int
    mean_revenue: float
    se_revenue: float
    mean_regret: float
    se_regret: float
    mean_fluid_value: float

    @property
    def revenue_gap(self) -> float:
        """Per-period gap Phi(gamma_0) - revenue/T, i.e. regret/T."""
        return self.mean_regret / self.T


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def aggregate(rows) -> list:
    """Mean and standard error per (N, M, K, policy, T) over successful rows."""
    rows = list(rows)
    if not rows:
        raise InputError("nothing to aggregate")
    groups = defaultdict(list)
    for r in rows:
        if r.ok:
            groups[(r.N, r.M, r.K, r.policy, r.T)].append(r)
    out = []
    for (N, M, K, policy, T), grp in sorted(groups.items()):
        rev, rev_se = _mean_se([g.revenue for g in grp])
        reg, reg_se = _mean_se([g.regret for g in grp])
        out.append(AggregateRow(policy, N, M, K, T, len(grp), rev, rev_se, reg, reg_se,
                                float(np.mean([g.fluid_value for g in grp]))))
    return out


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows, path) -> None:
    rows = list(rows)
    # spot-check the regret identity on about 1% of rows
    for r in rows[:: max(1, len(rows) // 100)]:
        if r.ok and abs(r.T * r.fluid_value - r.revenue - r.regret) > 1e-9:
            raise RuntimeError(f"regret column inconsistent in row {r}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(x) for x in r.as_list()])


def read_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append(ExperimentRow(
                policy=rec["policy"], N=int(rec["N"]), M=int(rec["M"]), K=int(rec["K"]),
                T=int(rec["T"]), trial=int(rec["trial"]), seed=int(rec["seed"]),
                revenue=float(rec["revenue"]), fluid_value=float(rec["fluid_value"]),
                regret=float(rec["regret"]), epochs_completed=int(rec["epochs_completed"]),
                status=rec["status"]))
    return out


def write_dat(agg, path) -> None:
    """gnuplot data: one block per (N, M, K, policy), blocks separated by two blank lines."""
    blocks = defaultdict(list)
    for a in agg:
        blocks[(a.N, a.M, a.K, a.policy)].append(a)
    with open(path, "w") as fh:
        for n, (key, items) in enumerate(sorted(blocks.items())):
            if n:
                fh.write("\n\n")
            N, M, K, policy = key
            fh.write(f"# policy={policy} N={N} M={M} K={K}\n")
            fh.write("# T count mean_revenue se_revenue mean_regret se_regret regret_per_T\n")
            for a in sorted(items, key=lambda a: a.T):
                fh.write(f"{a.T} {a.count} {a.mean_revenue:.10g} {a.se_revenue:.10g} "
                         f"{a.mean_regret:.10g} {a.se_regret:.10g} {a.revenue_gap:.10g}\n")


def write_outputs(rows, out_dir, configs, meta: dict | None = None) -> dict:
    """results.csv, aggregate.dat and run.json under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "results.csv", "dat": out / "aggregate.dat", "meta": out / "run.json"}
    write_csv(rows, paths["csv"])
    ok_rows = [r for r in rows if r.ok]
    if ok_rows:
        write_dat(aggregate(ok_rows), paths["dat"])
    info = dict(meta or {})
    info["configs"] = [c.to_dict() for c in configs]
    info["rows"] = len(rows)
    info["failed_rows"] = sum(not r.ok for r in rows)
    paths["meta"].write_text(json.dumps(info, indent=2, default=str) + "\n")
    return paths
