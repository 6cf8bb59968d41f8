"""Benchmark harness: paired statistics, experiment runner and reports.

The experiment grid is (instance file x variant kind x replicate x method).
Methods are run as a pipeline per cell: the heuristic portfolio stands
alone, the neighborhood search produces an incumbent, and the evolutionary
stage consumes that incumbent as its warm start; the pipeline's result is
the better of its two stages.  Rows serialize to CSV losslessly and feed
the comparison and hypothesis-test reports.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import alns as alns_mod
from . import brkga as brkga_mod
from .baselines import best_heuristic
from .instance import Instance, VariantSpec, build_instance, load_tsplib_file
from .schedule import Solution, coordination_metrics, evaluate

METHODS = ("heuristics", "alns", "pipeline")
DEFAULT_REPLICATES = {"base": 1, "2x": 1, "5x": 1, "1R10": 10, "1R20": 10}


class TooFewPairs(Exception):
    pass


class ZeroVariance(Exception):
    pass


# ---------------------------------------------------------------------------
# Paired statistics
# ---------------------------------------------------------------------------


def _signed_ranks(diffs):
    """Midranks of |d| for the nonzero differences, with their signs."""
    nz = [x for x in diffs if x != 0]
    order = sorted(range(len(nz)), key=lambda i: abs(nz[i]))
    ranks = [0.0] * len(nz)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(nz[order[j + 1]]) == abs(nz[order[i]]):
            j += 1
        mid = (i + j) / 2 + 1.0
        for t in range(i, j + 1):
            ranks[order[t]] = mid
        i = j + 1
    return nz, ranks


def _exact_tail_ge(ranks, w: float) -> float:
    """P(W* >= w) under the sign-flip null, by subset-sum counting over the
    doubled (hence integral) ranks."""
    scaled = [int(round(2 * r)) for r in ranks]
    total = sum(scaled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in scaled:
        for s in range(total, r - 1, -1):
            if counts[s - r]:
                counts[s] += counts[s - r]
    threshold = int(math.ceil(2 * w - 1e-9))
    tail = sum(counts[threshold:])
    return tail / (1 << len(ranks))


def wilcoxon_signed_rank(pairs, alternative: str = "greater"):
    """Paired signed-rank test on (base, variant) pairs.

    W is the rank sum of positive differences (variant - base), zero
    differences dropped, ties midranked.  Exact p by sign-pattern
    enumeration for up to 20 pairs, normal approximation with continuity
    and tie corrections above.  One-sided alternatives test whether the
    variant is greater/less than the base.
    """
    diffs = [v - b for b, v in pairs]
    nz, ranks = _signed_ranks(diffs)
    n = len(nz)
    if n < 5:
        raise TooFewPairs(f"need at least 5 nonzero differences, got {n}")
    w = sum(r for x, r in zip(nz, ranks) if x > 0)

    if n <= 20:
        p_ge = _exact_tail_ge(ranks, w)
        # P(W* <= w) via the mirrored statistic
        total = sum(ranks)
        p_le = _exact_tail_ge(ranks, total - w)
        if alternative == "greater":
            p = p_ge
        elif alternative == "less":
            p = p_le
        else:
            p = min(1.0, 2 * min(p_ge, p_le))
        return w, p

    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    groups: dict = {}
    for x, r in zip(nz, ranks):
        groups[abs(x)] = groups.get(abs(x), 0) + 1
    var -= sum(t ** 3 - t for t in groups.values()) / 48.0
    sd = math.sqrt(var)
    if alternative == "greater":
        z = (w - mu - 0.5) / sd
        p = 0.5 * math.erfc(z / math.sqrt(2))
    elif alternative == "less":
        z = (w - mu + 0.5) / sd
        p = 0.5 * math.erfc(-z / math.sqrt(2))
    else:
        z = (abs(w - mu) - 0.5) / sd
        p = min(1.0, math.erfc(z / math.sqrt(2)))
    return w, p


def cohens_d_paired(pairs) -> float:
    """Mean of the paired differences over their sample standard deviation."""
    diffs = [v - b for b, v in pairs]
    if len(diffs) < 2:
        raise TooFewPairs("need at least 2 pairs")
    mean = sum(diffs) / len(diffs)
    var = sum((x - mean) ** 2 for x in diffs) / (len(diffs) - 1)
    if var == 0:
        raise ZeroVariance("paired differences are constant")
    return mean / math.sqrt(var)


# ---------------------------------------------------------------------------
# Experiment configuration and rows
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    instance_files: list
    kinds: tuple = ("base", "2x", "5x", "1R10", "1R20")
    replicates: dict = field(default_factory=lambda: dict(DEFAULT_REPLICATES))
    methods: tuple = METHODS
    seed: int = 42
    alns_params: alns_mod.AlnsParams = field(default_factory=alns_mod.AlnsParams)
    brkga_params: brkga_mod.BrkgaParams = field(default_factory=brkga_mod.BrkgaParams)
    pool_size: int = 1
    out_dir: str | None = None


@dataclass
class ResultRow:
    instance: str
    variant: str
    replicate: int
    method: str
    makespan: float
    runtime: float
    cross_agent_pct: float
    interleaved_pct: float
    seed: int

    FIELDS = ("instance", "variant", "replicate", "method", "makespan",
              "runtime", "cross_agent_pct", "interleaved_pct", "seed")

    def as_list(self):
        return [getattr(self, f) for f in self.FIELDS]


def write_rows_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ResultRow.FIELDS)
        for row in sorted(rows, key=lambda r: (r.instance, r.variant, r.replicate, r.method)):
            writer.writerow([repr(x) if isinstance(x, float) else x
                             for x in row.as_list()])


def read_rows_csv(path) -> list:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(
                instance=rec["instance"],
                variant=rec["variant"],
                replicate=int(rec["replicate"]),
                method=rec["method"],
                makespan=float(rec["makespan"]),
                runtime=float(rec["runtime"]),
                cross_agent_pct=float(rec["cross_agent_pct"]),
                interleaved_pct=float(rec["interleaved_pct"]),
                seed=int(rec["seed"]),
            ))
    return rows


# ---------------------------------------------------------------------------
# Method runners
# ---------------------------------------------------------------------------


def run_pipeline(instance: Instance, alns_params, brkga_params, seed: int,
                 pool_size: int = 1, incumbent: Solution | None = None):
    """Neighborhood-search stage followed by the warm-started evolutionary
    stage; returns (solution, alns_incumbent).  The final answer is the
    better of the two stages (the decoder may re-time the warm seed, so the
    evolutionary stage alone does not guarantee dominance)."""
    if incumbent is None:
        if pool_size > 1:
            incumbent, _ = alns_mod.run_pool(instance, alns_params, pool_size, seed)
        else:
            incumbent, _ = alns_mod.run_alns(instance, alns_params, seed)
    rng = brkga_mod.np.random.Generator(brkga_mod.np.random.PCG64(
        alns_mod.worker_seed(seed, 7001)))
    warm = brkga_mod.warm_start_population(instance, incumbent, brkga_params, rng)
    refined, _ = brkga_mod.run_brkga(instance, brkga_params, warm_population=warm,
                                     seed=alns_mod.worker_seed(seed, 7002))
    z_inc = evaluate(instance, incumbent).makespan
    z_ref = evaluate(instance, refined).makespan
    return (refined if z_ref <= z_inc else incumbent), incumbent


def _run_method(instance: Instance, method: str, config: ExperimentConfig,
                cache: dict):
    """Run (or reuse) one method for a cell; caches the neighborhood-search
    incumbent so the pipeline consumes it instead of re-running."""
    if method == "heuristics":
        return best_heuristic(instance, seed=config.seed)
    if method == "alns":
        if "alns" not in cache:
            if config.pool_size > 1:
                sol, _ = alns_mod.run_pool(instance, config.alns_params,
                                           config.pool_size, config.seed)
            else:
                sol, _ = alns_mod.run_alns(instance, config.alns_params, config.seed)
            cache["alns"] = sol
        return cache["alns"]
    if method == "pipeline":
        incumbent = cache.get("alns")
        if incumbent is None:
            incumbent = _run_method(instance, "alns", config, cache)
        sol, _ = run_pipeline(instance, config.alns_params, config.brkga_params,
                              config.seed, config.pool_size, incumbent=incumbent)
        return sol
    raise ValueError(f"unknown method {method!r}")


def run_experiment(config: ExperimentConfig):
    """Run the full grid; per-cell failures are recorded and skipped.

    Returns (rows, failures) where failures is a list of
    (instance, variant, replicate, method, error-string)."""
    rows: list = []
    failures: list = []
    for path in config.instance_files:
        raw = load_tsplib_file(path)
        for kind in config.kinds:
            for rep in range(config.replicates.get(kind, 1)):
                inst = build_instance(raw, VariantSpec(kind, config.seed, rep))
                cache: dict = {}
                for method in config.methods:
                    t0 = time.perf_counter()
                    try:
                        sol = _run_method(inst, method, config, cache)
                        sched = evaluate(inst, sol)
                        metrics = coordination_metrics(inst, sol, sched)
                    except Exception as exc:  # cell failure; run continues
                        failures.append((raw.name, kind, rep, method, str(exc)))
                        continue
                    rows.append(ResultRow(
                        instance=raw.name,
                        variant=kind,
                        replicate=rep,
                        method=method,
                        makespan=sched.makespan,
                        runtime=time.perf_counter() - t0,
                        cross_agent_pct=metrics.cross_agent_pct,
                        interleaved_pct=metrics.interleaved_pct,
                        seed=config.seed,
                    ))
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(rows, out / "results.csv")
        (out / "comparison.txt").write_text(render_comparison(rows), encoding="utf-8")
        try:
            (out / "hypothesis.txt").write_text(
                render_hypothesis_table(hypothesis_tests(rows)), encoding="utf-8")
        except TooFewPairs:
            pass
    return rows, failures


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

_METHOD_TITLES = {
    "heuristics": "(0) Heuristics",
    "alns": "(1) ALNS",
    "pipeline": "(2) ALNS+BRKGA",
}


def _cell_makespans(rows):
    """{(instance, variant, method): mean makespan over replicates}."""
    acc: dict = {}
    for r in rows:
        acc.setdefault((r.instance, r.variant, r.method), []).append(r.makespan)
    return {key: sum(v) / len(v) for key, v in acc.items()}


def improvement_pct(z_from: float, z_to: float) -> float:
    return 100.0 * (z_from - z_to) / z_from


def render_comparison(rows) -> str:
    """Text table: one block per instance with method rows, variant columns
    and the two improvement rows."""
    cells = _cell_makespans(rows)
    instances = sorted({r.instance for r in rows})
    variants = [v for v in ("base", "2x", "5x", "1R10", "1R20")
                if any(r.variant == v for r in rows)]
    width = 14
    out = ["Instance | Approach        | " + " | ".join(f"{v:>{width}}" for v in variants)]
    out.append("-" * len(out[0]))
    for inst in instances:
        for method in METHODS:
            if not any(k == (inst, v, method) for v in variants for k in [(inst, v, method)]
                       if k in cells):
                continue
            vals = []
            for v in variants:
                z = cells.get((inst, v, method))
                vals.append(f"{z:>{width},.0f}" if z is not None else " " * width)
            out.append(f"{inst:<8} | {_METHOD_TITLES[method]:<15} | " + " | ".join(vals))
        for title, frm, to in (("1 Impr. %", "heuristics", "alns"),
                               ("2 vs 1 Impr. %", "alns", "pipeline")):
            vals = []
            for v in variants:
                a = cells.get((inst, v, frm))
                b = cells.get((inst, v, to))
                if a and b is not None:
                    vals.append(f"{improvement_pct(a, b):>{width}.2f}")
                else:
                    vals.append(" " * width)
            out.append(f"{inst:<8} | {title:<15} | " + " | ".join(vals))
        out.append("-" * len(out[0]))
    return "\n".join(out) + "\n"


def _metric_by_dataset(rows, method: str, metric: str, variant: str) -> dict:
    acc: dict = {}
    for r in rows:
        if r.method == method and r.variant == variant:
            acc.setdefault(r.instance, []).append(getattr(r, metric))
    return {inst: sum(v) / len(v) for inst, v in acc.items()}


def hypothesis_tests(rows, alternative: str = "greater"):
    """Paired tests of each variant against base for both coordination
    metrics, using the strongest method present in the rows."""
    method = next((m for m in ("pipeline", "alns", "heuristics")
                   if any(r.method == m for r in rows)), None)
    if method is None:
        raise TooFewPairs("no rows")
    results = []
    for metric in ("cross_agent_pct", "interleaved_pct"):
        base_vals = _metric_by_dataset(rows, method, metric, "base")
        for kind in ("2x", "5x", "1R10", "1R20"):
            var_vals = _metric_by_dataset(rows, method, metric, kind)
            common = sorted(set(base_vals) & set(var_vals))
            if len(common) < 5:
                continue
            pairs = [(base_vals[i], var_vals[i]) for i in common]
            mean_delta = sum(v - b for b, v in pairs) / len(pairs)
            try:
                d = cohens_d_paired(pairs)
            except ZeroVariance:
                d = math.inf if mean_delta > 0 else (-math.inf if mean_delta else 0.0)
            try:
                w, p = wilcoxon_signed_rank(pairs, alternative)
            except TooFewPairs:
                continue
            results.append({
                "metric": metric,
                "comparison": f"base->{kind}",
                "n": len(pairs),
                "mean_delta": mean_delta,
                "cohens_d": d,
                "W": w,
                "p": p,
            })
    return results


def render_hypothesis_table(results) -> str:
    out = [f"{'Metric':<18} {'Comparison':<12} {'n':>3} {'MeanΔ(pp)':>10} "
           f"{'Cohen d':>8} {'W':>7} {'p':>8}"]
    for r in results:
        out.append(f"{r['metric']:<18} {r['comparison']:<12} {r['n']:>3} "
                   f"{r['mean_delta']:>10.2f} {r['cohens_d']:>8.2f} "
                   f"{r['W']:>7.1f} {r['p']:>8.4f}")
    return "\n".join(out) + "\n"
