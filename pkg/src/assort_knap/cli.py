"""Command-line entry point ``assort-knap``.

Products are numbered from 1 in everything printed here.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys

import numpy as np

from . import harness, kernels
from .core import InputError, load_instance, save_instance
from .fluid import BENCHMARK_EPSILON, lemma1_check, solve_phi
from .linprog import SolverError
from .policy import PolicyKind, initial_epochs
from .sampler import decompose


def _one_based(members):
    return [i + 1 for i in members]


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    inst = harness.generate_instance(args.n, args.m, args.k, args.t, rng)
    save_instance(inst, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_solve_fluid(args) -> int:
    inst = load_instance(args.instance)
    sol = solve_phi(inst, inst.gamma0, args.epsilon)
    print(f"phi {sol.objective!r}")
    print("x_fluid " + ",".join(repr(float(x)) for x in sol.x))
    print(f"denominator {sol.denominator!r}")
    print(f"tau0 {initial_epochs(inst.horizon, sol.denominator)}")
    print(f"lp_solves {sol.lp_solves}")
    print(f"lemma1_discrepancy {lemma1_check(inst, inst.gamma0, args.epsilon)!r}")
    return 0


def cmd_simulate(args) -> int:
    from .sim import run_trajectory

    inst = load_instance(args.instance)
    kind = PolicyKind.parse(args.policy)
    res = run_trajectory(inst, kind, args.seed)
    summary = {
        "policy": kind.value, "seed": res.seed, "revenue": res.total_revenue,
        "fluid_benchmark": res.fluid_benchmark, "regret": res.regret,
        "periods_used": res.periods_used, "termination": res.termination,
        "epochs_completed": res.epochs_completed,
    }
    print(json.dumps(summary))
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["tau", "t_tau", "s_tau", "m_tau", "beta_tau", "delta_tau"]
                            + [f"gamma_tau_{j + 1}" for j in range(inst.n_resources)])
            for ep in res.epochs:
                writer.writerow([ep.tau, ep.t_tau, repr(ep.s), ep.length, repr(ep.revenue),
                                 repr(ep.delta)] + [repr(float(g)) for g in ep.gamma])
    return 0


def _parse_x(text):
    try:
        return np.array([float(p) for p in text.split(",") if p.strip()])
    except ValueError as exc:
        raise InputError(f"--x must be a comma-separated list of numbers: {exc}") from exc


def cmd_decompose(args) -> int:
    x = _parse_x(args.x)
    dec = decompose(x, args.k, args.method)
    for w, sup in zip(dec.weights, dec.supports):
        print(f"{float(w)!r}\t{{{','.join(str(i) for i in _one_based(sup))}}}")
    err = float(np.abs(dec.marginals(len(x)) - np.clip(x, 0, 1)).max()) if len(x) else 0.0
    print(f"# supports {len(dec)}  weight_sum {float(dec.weights.sum())!r}  max_marginal_error {err!r}")
    if err > 1e-9 or abs(dec.weights.sum() - 1.0) > 1e-9:
        print("marginal reconstruction exceeds 1e-9", file=sys.stderr)
        return 1
    return 0


def cmd_experiment(args) -> int:
    try:
        if args.config:
            configs = harness.load_config(args.config, args.seed)
        else:
            seed = 2024 if args.seed is None else args.seed
            configs = harness.profile_configs(args.profile, seed)
        if args.trials is not None:
            configs = [harness.ExperimentConfig(**dict(c.to_dict(), n_trials=args.trials))
                       for c in configs]
    except InputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    out = args.out or configs[0].output_path or "results"
    jobs = args.jobs or harness.default_jobs()

    def progress(done, total):
        if not args.quiet and (done == total or done % max(1, total // 20) == 0):
            print(f"  {done}/{total} work items", file=sys.stderr)

    rows = harness.run_experiment(configs, jobs=jobs, progress=progress)
    meta = {
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "jobs": jobs, "backend": kernels.BACKEND,
        "profile": None if args.config else args.profile,
    }
    paths = harness.write_outputs(rows, out, configs, meta)
    frac = harness.failure_fraction(rows)
    print(f"wrote {paths['csv']} ({len(rows)} rows), {paths['dat']}, {paths['meta']}")
    if frac > harness.FAILURE_LIMIT:
        print(f"solver failures in {frac:.1%} of rows", file=sys.stderr)
        return harness.EXIT_SOLVER
    return harness.EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="assort-knap",
                                description="MNL dynamic assortment with knapsack constraints")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--t", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("solve-fluid", help="solve the fluid problem at the initial inventory")
    f.add_argument("--instance", required=True)
    f.add_argument("--epsilon", type=float, default=BENCHMARK_EPSILON)
    f.set_defaults(func=cmd_solve_fluid)

    s = sub.add_parser("simulate", help="simulate one trajectory")
    s.add_argument("--instance", required=True)
    s.add_argument("--policy", default="resolving", choices=["resolving", "per-period", "per-epoch"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trace", help="write per-epoch trace CSV here")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("decompose", help="sample decomposition of a fractional assortment")
    d.add_argument("--x", required=True, help="comma-separated values in [0, 1]")
    d.add_argument("--k", type=int, required=True)
    d.add_argument("--method", default="reduced", choices=["reduced", "generic"])
    d.set_defaults(func=cmd_decompose)

    e = sub.add_parser("experiment", help="run a batch of trials and write CSV / plot data")
    e.add_argument("--config")
    e.add_argument("--profile", default="desk", choices=["desk", "full"])
    e.add_argument("--jobs", type=int)
    e.add_argument("--out")
    e.add_argument("--seed", type=int, help="override the master seed")
    e.add_argument("--trials", type=int, help="override the number of trials")
    e.add_argument("--quiet", action="store_true")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return harness.EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
