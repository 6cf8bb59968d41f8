"""Command-line interface.

Subcommands: ``solve`` an instance with one method, ``variants`` to expand
a TSPLIB file into instance documents, ``bench`` for the experiment grid,
``verify`` to replay and audit a solution file, ``oracle`` for tiny-instance
optima, ``stats`` for the paired-test tables, and ``export-milp``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import alns as alns_mod
from . import bench as bench_mod
from . import brkga as brkga_mod
from . import oracle as oracle_mod
from .baselines import best_heuristic
from .config import load_config, params_from_config
from .instance import Instance, VariantSpec, build_instance, load_tsplib_file
from .schedule import Solution, coordination_metrics, evaluate


def _cmd_solve(args) -> int:
    instance = Instance.load(args.instance)
    cfg = load_config(args.params)
    alns_params, brkga_params, pool_size = params_from_config(cfg)
    stats = None
    if args.method == "heuristics":
        sol = best_heuristic(instance, seed=args.seed)
    elif args.method == "alns":
        if pool_size > 1:
            sol, stats = alns_mod.run_pool(instance, alns_params, pool_size, args.seed)
        else:
            sol, stats = alns_mod.run_alns(instance, alns_params, args.seed)
    else:
        sol, _ = bench_mod.run_pipeline(instance, alns_params, brkga_params,
                                        args.seed, pool_size)
    sched = evaluate(instance, sol)
    metrics = coordination_metrics(instance, sol, sched)
    if args.out:
        sol.save(args.out, instance.label)
    if args.stats_out and stats is not None and hasattr(stats, "weight_rows"):
        with open(args.stats_out, "w", newline="", encoding="utf-8") as fh:
            rows = stats.weight_rows
            if rows:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows(rows)
    print(f"instance: {instance.label}")
    print(f"method: {args.method}")
    print(f"makespan: {sched.makespan}")
    print(f"cross_agent_pct: {metrics.cross_agent_pct:.2f}")
    print(f"interleaved_pct: {metrics.interleaved_pct:.2f}")
    return 0


def _cmd_variants(args) -> int:
    raw = load_tsplib_file(args.tsp)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    canonical = {k.lower(): k for k in ("base", "2x", "5x", "1R10", "1R20")}
    written = []
    for kind in kinds:
        kind = canonical.get(kind.lower())
        if kind is None:
            print(f"unknown variant kind {kind!r}", file=sys.stderr)
            return 2
        reps = args.replicates if kind in ("1R10", "1R20") else 1
        for rep in range(reps):
            inst = build_instance(raw, VariantSpec(kind, args.seed, rep))
            path = out_dir / f"{inst.label}.json"
            inst.save(path)
            written.append(path)
    print(f"wrote {len(written)} instance files to {out_dir}")
    return 0


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    alns_params, brkga_params, pool_size = params_from_config(cfg)
    config = bench_mod.ExperimentConfig(
        instance_files=cfg.get("instances", []),
        kinds=tuple(cfg.get("kinds", ("base", "2x", "5x", "1R10", "1R20"))),
        replicates={**bench_mod.DEFAULT_REPLICATES, **cfg.get("replicates", {})},
        methods=tuple(cfg.get("methods", bench_mod.METHODS)),
        seed=int(cfg.get("seed", 42)),
        alns_params=alns_params,
        brkga_params=brkga_params,
        pool_size=pool_size,
        out_dir=args.out,
    )
    if not config.instance_files:
        print("config lists no instances", file=sys.stderr)
        return 2
    rows, failures = bench_mod.run_experiment(config)
    print(f"{len(rows)} result rows -> {args.out}")
    for fail in failures:
        print("FAILED:", *fail, file=sys.stderr)
    return 0 if not failures else 1


def _cmd_verify(args) -> int:
    instance = Instance.load(args.instance)
    sol = Solution.load(args.solution)
    sched = evaluate(instance, sol)
    metrics = coordination_metrics(instance, sol, sched)
    print(f"instance: {instance.label}")
    print(f"makespan: {sched.makespan}")
    print(f"cross_agent_pct: {metrics.cross_agent_pct:.2f}")
    print(f"interleaved_pct: {metrics.interleaved_pct:.2f}")
    print("constraint report:")
    ok = True
    for c in instance.customers:
        gap = sched.t_pickup[c] - sched.t_drop[c]
        flag = "ok" if gap >= instance.p[c] - 1e-9 else "VIOLATED"
        ok &= flag == "ok"
        print(f"  customer {c}: pickup-dropoff gap {gap} >= p={instance.p[c]} [{flag}]")
    for v, events in enumerate(sched.events):
        qs = [ev.q_after for ev in events]
        in_range = all(0 <= q <= instance.k for q in qs)
        ok &= in_range
        print(f"  vehicle {v}: start load {sched.initial_loads[v]}, "
              f"trajectory {qs} within [0,{instance.k}] [{'ok' if in_range else 'VIOLATED'}]")
    print("schedule rows:")
    for row in sched.to_rows():
        print(f"  v{row['vehicle']} #{row['seq']} {row['op']}{row['customer']} "
              f"arrive={row['arrival']} time={row['time']} q={row['q_after']}")
    return 0 if ok else 1


def _cmd_oracle(args) -> int:
    instance = Instance.load(args.instance)
    limits = oracle_mod.OracleLimits(max_customers=args.max_customers)
    result = oracle_mod.exact_solve(instance, limits)
    print(f"instance: {instance.label}")
    print(f"optimal makespan: {result.makespan}" if result.optimal
          else f"best found (budget exhausted): {result.makespan}")
    print(f"nodes explored: {result.nodes}")
    if args.out:
        result.solution.save(args.out, instance.label)
    return 0


def _cmd_stats(args) -> int:
    rows = bench_mod.read_rows_csv(args.rows)
    results = bench_mod.hypothesis_tests(rows)
    print(bench_mod.render_hypothesis_table(results), end="")
    print()
    print(bench_mod.render_comparison(rows), end="")
    return 0


def _cmd_export_milp(args) -> int:
    instance = Instance.load(args.instance)
    text = oracle_mod.export_milp(instance, big_m=args.big_m)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrp-rpd",
        description="Solver suite for routing with resource-constrained pickup and delivery",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve an instance file with one method")
    s.add_argument("instance")
    s.add_argument("--method", choices=("heuristics", "alns", "pipeline"),
                   default="pipeline")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--params", help="JSON config file")
    s.add_argument("--out", help="solution output path")
    s.add_argument("--stats-out", help="per-run stats rows (CSV)")
    s.set_defaults(func=_cmd_solve)

    s = sub.add_parser("variants", help="expand a TSPLIB file into instances")
    s.add_argument("tsp")
    s.add_argument("--kinds", default="base,2x,5x,1r10,1r20")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--replicates", type=int, default=10)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_variants)

    s = sub.add_parser("bench", help="run the experiment grid from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_bench)

    s = sub.add_parser("verify", help="replay a solution and audit constraints")
    s.add_argument("instance")
    s.add_argument("solution")
    s.set_defaults(func=_cmd_verify)

    s = sub.add_parser("oracle", help="exact optimum for a tiny instance")
    s.add_argument("instance")
    s.add_argument("--max-customers", type=int, default=6)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_oracle)

    s = sub.add_parser("stats", help="paired tests and comparison table from rows")
    s.add_argument("--rows", required=True)
    s.set_defaults(func=_cmd_stats)

    s = sub.add_parser("export-milp", help="write the model in LP format")
    s.add_argument("instance")
    s.add_argument("--big-m", type=float, default=None)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_export_milp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
