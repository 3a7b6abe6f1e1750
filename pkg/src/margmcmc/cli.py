"""Command line interface.

Subcommands:
  simulate   write benchmark datasets (plus .truth companions) to a directory
  run        execute the benchmark matrix and append result rows
  summarise  aggregate a results file into per-cell five-number summaries
  check      fast self-checks of the core numerics

Exit codes: 0 success, 1 record failure(s), 2 usage error.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import harness as hz
from . import simulate as sim


def _add_common_run_args(p):
    p.add_argument("--scenario", action="append", default=None,
                   help="scenario id (repeatable; default: all)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--replicates", type=int, default=5)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="margmcmc",
        description="Benchmark marginalised vs full discrete-latent models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write benchmark datasets")
    _add_common_run_args(p_sim)
    p_sim.add_argument("--out", default=".", help="output directory")

    p_run = sub.add_parser("run", help="execute benchmark records")
    _add_common_run_args(p_run)
    p_run.add_argument("--method", action="append", default=None,
                       choices=list(hz.METHODS),
                       help="method arm (repeatable; default: all applicable)")
    p_run.add_argument("--chains", type=int, default=3)
    p_run.add_argument("--iterations", type=int, default=3000)
    p_run.add_argument("--warmup", type=int, default=1500)
    p_run.add_argument("--out", default="results.csv", help="results file")
    p_run.add_argument("--parallel", type=int, default=1,
                       help="records run concurrently (chains stay serial)")
    p_run.add_argument("--format", choices=["csv", "json"], default="csv")
    p_run.add_argument("--keep-going", action="store_true",
                       help="exit 0 even if some records errored")

    p_sum = sub.add_parser("summarise", help="aggregate a results file")
    p_sum.add_argument("results", help="results CSV produced by `run`")
    p_sum.add_argument("--out", default=None,
                       help="summary output file (default: stdout)")
    p_sum.add_argument("--format", choices=["csv", "json"], default="csv")

    sub.add_parser("check", help="run fast numeric self-checks")
    return parser


def _selected_scenarios(args):
    catalog = sim.scenario_catalog()
    if not args.scenario:
        return catalog
    by_id = {s.id: s for s in catalog}
    out = []
    for sid in args.scenario:
        if sid not in by_id:
            raise SystemExit(
                f"error: unknown scenario {sid!r}; known: "
                + ", ".join(by_id))
        out.append(by_id[sid])
    return out


def cmd_simulate(args):
    os.makedirs(args.out, exist_ok=True)
    for scenario in _selected_scenarios(args):
        for rep in range(1, args.replicates + 1):
            path = os.path.join(args.out, f"{scenario.id}-r{rep}.dat")
            sim.write_dataset(path, scenario, rep, args.seed)
            print(path)
    return 0


def cmd_run(args):
    specs = []
    for scenario in _selected_scenarios(args):
        methods = args.method or hz.methods_for_scenario(scenario)
        for method in methods:
            if method not in hz.methods_for_scenario(scenario):
                print(f"skip: {method} not applicable to {scenario.id}",
                      file=sys.stderr)
                continue
            specs.append(hz.RunSpec(
                scenario_id=scenario.id, method=method, chains=args.chains,
                iterations=args.iterations, warmup=args.warmup,
                replicates=args.replicates, master_seed=args.seed))
    if not specs:
        raise SystemExit("error: no runnable (scenario, method) cells")

    if args.format == "csv":
        sink = hz.csv_appender(args.out)
    else:
        def sink(rec):
            hz.write_records_jsonl(args.out, [rec], append=True)

    def progress(rec):
        print(f"{rec.scenario_id} {rec.method} r{rec.replicate}: "
              f"{rec.status} time={rec.comp_time_s:.1f}s "
              f"min_ess={rec.min_ess:.1f} max_rhat={rec.max_rhat:.3f}",
              flush=True)

    records = hz.run_matrix(specs, parallelism=args.parallel, sink=sink,
                            progress=progress)
    failures = [r for r in records if r.status != "ok"]
    if failures:
        print(f"{len(failures)} of {len(records)} records failed",
              file=sys.stderr)
        return 0 if args.keep_going else 1
    return 0


def cmd_summarise(args):
    rows = hz.read_records_csv(args.results)
    summary = hz.summarise(rows)
    flat = hz.summary_csv_rows(summary)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "json":
            json.dump(summary, out, indent=2, default=float)
            out.write("\n")
        else:
            writer = csv.DictWriter(out, fieldnames=list(flat[0].keys()))
            writer.writeheader()
            writer.writerows(flat)
    finally:
        if args.out:
            out.close()
    flagged = [e for e in summary if e.get("rhat_flag")]
    for e in flagged:
        print(f"warning: {e['scenario_id']}/{e['method']} has max-rhat "
              f"above {hz.RHAT_THRESHOLD}", file=sys.stderr)
    return 0


def cmd_check(_args):
    """Fast invariant checks over the core numerics; prints one line each."""
    from scipy import stats as st

    from . import dawid_skene as dsm
    from . import mixture as mx
    from .diagnostics import ess, split_rhat
    from .stats import log_sum_exp, make_rng

    failures = 0

    def report(name, ok):
        nonlocal failures
        print(f"{'ok' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1

    rng = make_rng(0, 0)
    x = rng.normal(size=50)
    report("log_sum_exp shift invariance",
           abs(log_sum_exp(x + 100.0) - (log_sum_exp(x) + 100.0)) < 1e-10)

    data = sim.gen_mixture(sim.get_scenario("two-comp-1"), 1, 0)[0]
    model = mx.MixtureModel(2)
    u = rng.normal(size=model.n_dim)
    g = model.grad_u(data, u)
    h = 1e-6
    fd = np.array([(model.log_post_u(data, u + h * e) -
                    model.log_post_u(data, u - h * e)) / (2 * h)
                   for e in np.eye(model.n_dim)])
    report("mixture gradient vs finite differences",
           np.abs(g - fd).max() < 1e-4)

    params, _ = model.constrain(u)
    small = mx.MixtureData(data.x[:8])
    brute = log_sum_exp(np.array([
        mx.mix_full_log_joint(small, np.array(z), params)
        for z in np.ndindex(*(2,) * 8)]))
    report("mixture marginal vs latent enumeration",
           abs(brute - mx.mix_marginal_log_joint(small, params)) < 1e-8)

    ds_data = sim.gen_ds(sim.get_scenario("ds"), 1, 0)[0]
    ds_model = dsm.DawidSkeneModel(5, 5)
    ud = rng.normal(size=ds_model.n_dim) * 0.3
    gd = ds_model.grad_u(ds_data, ud)
    idx = rng.choice(ds_model.n_dim, size=10, replace=False)
    fd = np.array([(ds_model.log_post_u(ds_data, ud + h * np.eye(ds_model.n_dim)[i])
                    - ds_model.log_post_u(ds_data, ud - h * np.eye(ds_model.n_dim)[i]))
                   / (2 * h) for i in idx])
    report("rating-model gradient vs finite differences",
           np.abs(gd[idx] - fd).max() < 1e-4)

    iid = make_rng(1, 0).standard_normal((3, 1000))
    report("iid effective sample size near nominal",
           abs(ess(iid) / 3000.0 - 1.0) < 0.15)
    apart = np.vstack([iid[0], iid[1] + 10.0])
    report("split-rhat flags separated chains", split_rhat(apart) > 3.0)

    print("all checks passed" if failures == 0 else f"{failures} check(s) failed")
    return 0 if failures == 0 else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"simulate": cmd_simulate, "run": cmd_run,
               "summarise": cmd_summarise, "check": cmd_check}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
