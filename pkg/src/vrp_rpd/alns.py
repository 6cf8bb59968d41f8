"""Adaptive large neighborhood search with simulated-annealing acceptance.

Six destroy operators remove customer subsets (both operations of each
customer), four regret-style repair operators reinsert them, and operator
weights adapt to observed success.  Periodic deterministic local search
(pickup repositioning and whole-customer relocation off the bottleneck
route) intensifies between destroy-repair iterations.  A worker pool shares
a best-so-far incumbent at fixed cadences; workers are otherwise
independent.

Candidate ranking inside destroy gain estimation, repair and the local
searches uses two-pass timing; every retained solution is re-scored with the
exact evaluator, and candidates that deadlock are discarded without score
credit.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import insertion
from .insertion import InsertionContext, RepairFailed
from .schedule import (OpKind, ScheduleError, Solution, evaluate,
                       exact_makespan, two_pass_estimate)

_D = OpKind.DROPOFF
_P = OpKind.PICKUP

DESTROY_OPERATORS = ("random", "worst", "shaw", "cluster", "route", "critical_path")
REPAIR_OPERATORS = ("greedy", "regret2", "regret3", "regretm")

SHAW_TRAVEL_WEIGHT = 9.0
SHAW_TIME_WEIGHT = 3.0
SHAW_AGENT_WEIGHT = 5.0
WORST_POWER = 6.0


@dataclass
class AlnsParams:
    t0: float = 0.30
    alpha: float = 0.9998
    reheat_factor: float = 0.50
    stagnation_threshold: int = 2000
    weight_interval: int = 100
    reaction: float = 0.1
    sigma1: float = 33.0
    sigma2: float = 9.0
    sigma3: float = 13.0
    min_weight: float = 0.1
    max_iter: int = 20000
    workers_per_pool: int = 32
    pickup_reposition_interval: int = 200
    cross_agent_interval: int = 500
    best_check_interval: int = 1000
    pool_sync_interval: int = 100

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("cooling rate must lie in (0, 1)")
        if not self.sigma1 > self.sigma3 > self.sigma2 > 0:
            raise ValueError("scores must satisfy sigma1 > sigma3 > sigma2 > 0")
        for name in ("weight_interval", "pickup_reposition_interval",
                     "cross_agent_interval", "best_check_interval",
                     "pool_sync_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class OperatorBank:
    """Adaptive weights, accumulated scores and attempt counts."""

    weights: dict
    scores: dict
    attempts: dict

    @classmethod
    def fresh(cls) -> "OperatorBank":
        names = DESTROY_OPERATORS + REPAIR_OPERATORS
        return cls(weights={n: 1.0 for n in names},
                   scores={n: 0.0 for n in names},
                   attempts={n: 0 for n in names})


@dataclass
class AlnsStats:
    iterations: int = 0
    initial_makespan: float = 0.0
    best_trace: list = field(default_factory=list)  # (iteration, best makespan)
    weight_rows: list = field(default_factory=list)
    attempts: dict = field(default_factory=dict)
    accepted: int = 0
    rejected_candidates: int = 0
    reheats: int = 0
    final_temperature: float = 0.0


def removal_bounds(n: int) -> tuple:
    """Removal-count bounds: q_max = max(4, floor(0.05 n)) and
    q_min = max(4, floor(q_max / 2))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    q_max = max(4, n // 20)
    q_min = max(4, q_max // 2)
    return q_min, q_max


def sa_accept(z_candidate: float, z_current: float, temperature: float, rng) -> bool:
    """Accept improving candidates outright, worse ones with probability
    exp(-(z' - z) / T) from a single uniform draw."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if z_candidate < z_current:
        return True
    return rng.random() < math.exp(-(z_candidate - z_current) / temperature)


def update_weights(bank: OperatorBank, r: float, min_weight: float = 0.1) -> OperatorBank:
    """w <- max(min_weight, (1-r) w + r s/a) with s/a := 0 when a = 0;
    scores and attempts reset afterwards."""
    for name, w in bank.weights.items():
        a = bank.attempts[name]
        avg = bank.scores[name] / a if a else 0.0
        bank.weights[name] = max(min_weight, (1.0 - r) * w + r * avg)
        bank.scores[name] = 0.0
        bank.attempts[name] = 0
    return bank


def roulette_select(names, weights: dict, rng) -> str:
    total = sum(weights[n] for n in names)
    x = rng.random() * total
    acc = 0.0
    for n in names:
        acc += weights[n]
        if x < acc:
            return n
    return names[-1]


def shaw_relatedness(instance, schedule, ci: int, cj: int) -> float:
    """Composite relatedness: travel time, dropoff-time gap and one
    omega/2 term per operation type assigned to different vehicles."""
    r = SHAW_TRAVEL_WEIGHT * instance.d[ci][cj]
    r += SHAW_TIME_WEIGHT * abs(schedule.t_drop[ci] - schedule.t_drop[cj])
    half = SHAW_AGENT_WEIGHT / 2.0
    if schedule.drop_vehicle[ci] != schedule.drop_vehicle[cj]:
        r += half
    if schedule.pickup_vehicle[ci] != schedule.pickup_vehicle[cj]:
        r += half
    return r


# ---------------------------------------------------------------------------
# Destroy operators
# ---------------------------------------------------------------------------


class EmptySolution(Exception):
    pass


def _power_law_pick(items, rng, power: float = WORST_POWER):
    idx = int(rng.random() ** power * len(items))
    return items[min(idx, len(items) - 1)]


def _sample(items, size: int, rng) -> list:
    """Uniform sample without replacement (partial Fisher-Yates)."""
    pool = list(items)
    n = len(pool)
    for i in range(size):
        j = i + int(rng.integers(n - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:size]


def destroy(instance, solution: Solution, operator: str, q: int, rng):
    """Remove both operations of (at least) q customers.

    Returns (partial_solution, removed_customers).  The route operator may
    remove more than q; route and critical-path top up to q_min when their
    route holds fewer customers.  The removal cascade in
    ``insertion.remove_customers`` may widen the set further to keep the
    partial capacity-valid; the returned list is always the full set.
    """
    n = instance.n
    if n == 0 or all(not t for t in solution.tours):
        raise EmptySolution("nothing to remove")
    q = min(q, n)
    customers = list(instance.customers)
    q_min, _ = removal_bounds(n)
    q_min = min(q_min, n)

    if operator == "random":
        picked = _sample(customers, q, rng)
    elif operator == "worst":
        gains = insertion.removal_gains(instance, solution)
        ranked = sorted(customers, key=lambda c: (-gains[c], c))
        picked = []
        while len(picked) < q:
            c = _power_law_pick(ranked, rng)
            ranked.remove(c)
            picked.append(c)
    elif operator == "shaw":
        sched = evaluate(instance, solution)
        seed_c = customers[int(rng.integers(n))]
        picked = [seed_c]
        pool = [c for c in customers if c != seed_c]
        while len(picked) < q and pool:
            ref = picked[int(rng.integers(len(picked)))]
            best = min(pool, key=lambda c: (shaw_relatedness(instance, sched, ref, c), c))
            pool.remove(best)
            picked.append(best)
    elif operator == "cluster":
        center = customers[int(rng.integers(n))]
        ranked = sorted((c for c in customers if c != center),
                        key=lambda c: (instance.d[center][c], c))
        picked = [center] + ranked[:q - 1]
    elif operator == "route":
        non_empty = [v for v, t in enumerate(solution.tours) if t]
        v = non_empty[int(rng.integers(len(non_empty)))]
        picked = sorted({c for c, _ in solution.tours[v]})
        if len(picked) < q_min:
            pool = [c for c in customers if c not in picked]
            while len(picked) < q_min and pool:
                best = min(pool, key=lambda c: (min(instance.d[c][x] for x in picked), c))
                pool.remove(best)
                picked.append(best)
    elif operator == "critical_path":
        sched = evaluate(instance, solution)
        v = sched.bottleneck()
        on_route = sorted({c for c, _ in solution.tours[v]})
        if len(on_route) >= q:
            picked = _sample(on_route, q, rng)
        else:
            picked = list(on_route)
            if len(picked) < q_min:
                gains = insertion.removal_gains(instance, solution)
                pool = sorted((c for c in customers if c not in picked),
                              key=lambda c: (-gains[c], c))
                picked.extend(pool[:q_min - len(picked)])
    else:
        raise ValueError(f"unknown destroy operator {operator!r}")

    tours, removed = insertion.remove_customers(instance, solution, picked)
    return Solution.from_lists(tours), removed


# ---------------------------------------------------------------------------
# Repair operators
# ---------------------------------------------------------------------------

_REGRET_K = {"greedy": 0, "regret2": 2, "regret3": 3}


def _repair_scored(instance, partial: Solution, removed, operator: str, rng):
    if operator not in REPAIR_OPERATORS:
        raise ValueError(f"unknown repair operator {operator!r}")
    if not removed:
        return partial, exact_makespan(instance, partial)
    regret_k = _REGRET_K.get(operator, instance.m)
    ctx = InsertionContext(instance, partial.tours)
    insertion.reinsert_all(ctx, removed, regret_k=regret_k, rng=rng)
    sol = ctx.solution()
    try:
        z = exact_makespan(instance, sol)
    except ScheduleError as exc:
        raise RepairFailed(str(exc)) from exc
    return sol, z


def repair(instance, partial: Solution, removed, operator: str, rng) -> Solution:
    """Reinsert every removed customer's dropoff and pickup; the result
    passes the exact evaluator or RepairFailed is raised."""
    if not removed:
        return partial
    return _repair_scored(instance, partial, removed, operator, rng)[0]


# ---------------------------------------------------------------------------
# Initial solution
# ---------------------------------------------------------------------------


def sweep_order(instance) -> list:
    """Coordinate-free sweep: order customers by the signed key
    (d(a,c) - d(b,c), d(0,c)) where a is the customer farthest from the
    depot and b the customer farthest from a."""
    d = instance.d
    cs = list(instance.customers)
    a = max(cs, key=lambda c: (d[0][c], -c))
    b = max(cs, key=lambda c: (d[a][c], -c))
    return sorted(cs, key=lambda c: (d[a][c] - d[b][c], d[0][c], c))


def _balance_sectors(instance, sectors) -> list:
    """Move customers from overloaded to underloaded sectors until the max
    deviation from the mean workload drops below 10% or nothing helps."""
    w = {c: 2.0 * instance.d[0][c] + instance.p[c] for c in instance.customers}
    sectors = [list(s) for s in sectors]
    loads = [sum(w[c] for c in s) for s in sectors]
    mean = sum(loads) / len(loads) if loads else 0.0
    for _ in range(2 * instance.n):
        if mean <= 0 or max(abs(l - mean) for l in loads) < 0.10 * mean:
            break
        hi = max(range(len(loads)), key=lambda i: loads[i])
        lo = min(range(len(loads)), key=lambda i: loads[i])
        if not sectors[hi]:
            break
        best_c, best_peak = None, max(loads)
        for c in sectors[hi]:
            peak = max(loads[hi] - w[c], loads[lo] + w[c],
                       *(loads[i] for i in range(len(loads)) if i not in (hi, lo)))
            if peak < best_peak:
                best_c, best_peak = c, peak
        if best_c is None:
            break
        sectors[hi].remove(best_c)
        sectors[lo].append(best_c)
        loads[hi] -= w[best_c]
        loads[lo] += w[best_c]
    return sectors


def _route_sector(instance, customers) -> list:
    """Nearest-feasible-operation route for one vehicle serving its own
    sector: greedy choice between pending dropoffs and ready pickups."""
    d, p, k = instance.d, instance.p, instance.k
    tour = []
    t, loc, q = 0.0, 0, k
    undropped = set(customers)
    unpicked: dict = {}
    while undropped or unpicked:
        best = None
        if q > 0:
            for c in undropped:
                key = (d[loc][c], 0, c)
                if best is None or key < best:
                    best = key
        if q < k:
            for c, ready in unpicked.items():
                arr = t + d[loc][c]
                dep = arr if arr >= ready else ready
                key = (dep - t, 1, c)
                if best is None or key < best:
                    best = key
        _, is_pick, c = best
        if is_pick:
            arr = t + d[loc][c]
            ready = unpicked.pop(c)
            t = arr if arr >= ready else ready
            q += 1
            tour.append((c, _P))
        else:
            t += d[loc][c]
            undropped.discard(c)
            unpicked[c] = t + p[c]
            q -= 1
            tour.append((c, _D))
        loc = c
    return tour


def construct_initial(instance, seed: int = 0) -> Solution:
    """Sweep clustering, workload balancing, per-vehicle greedy routing,
    then the deterministic refinement pair until no improvement."""
    m = instance.m
    order = sweep_order(instance)
    n = instance.n
    sizes = [n // m + (1 if i < n % m else 0) for i in range(m)]
    sectors, at = [], 0
    for s in sizes:
        sectors.append(order[at:at + s])
        at += s
    sectors = _balance_sectors(instance, sectors)
    sol = Solution.from_lists([_route_sector(instance, sec) for sec in sectors])
    evaluate(instance, sol)

    for _ in range(10):
        z = evaluate(instance, sol).makespan
        sol = pickup_repositioning(instance, sol)
        sol = cross_agent_relocation(instance, sol)
        if evaluate(instance, sol).makespan >= z - 1e-9:
            break
    return sol


# ---------------------------------------------------------------------------
# Periodic local search
# ---------------------------------------------------------------------------

_NEAR_BOTTLENECK = 0.9
_VERIFY_LIMIT = 10


def _apply_best_verified(instance, tours, candidates, z_cur):
    """Estimate-ranked candidates; exact-verify the best few and apply the
    strongest truly improving one.  Returns new tours or None."""
    candidates.sort(key=lambda c: c[0])
    best = None
    for est, cand in candidates[:_VERIFY_LIMIT]:
        try:
            z = exact_makespan(instance, Solution.from_lists(cand))
        except ScheduleError:
            continue
        if z < z_cur - 1e-9 and (best is None or z < best[0]):
            best = (z, cand)
    return None if best is None else best[1]


def pickup_repositioning(instance, solution: Solution) -> Solution:
    """Relocate pickups away from bottleneck and near-bottleneck vehicles
    (return time >= 90% of the makespan); up to three improvement passes,
    deterministic, improvement-only."""
    tours = [list(t) for t in solution.tours]
    for _ in range(3):
        sched = evaluate(instance, Solution.from_lists(tours))
        z = sched.makespan
        if z <= 0:
            break
        hot = {v for v, r in enumerate(sched.returns) if r >= _NEAR_BOTTLENECK * z}
        candidates = []
        for v in hot:
            for i, (c, kind) in enumerate(tours[v]):
                if kind is not _P:
                    continue
                for w in range(instance.m):
                    base = [list(t) for t in tours]
                    op = base[v].pop(i)
                    for g in range(len(base[w]) + 1):
                        if w == v and g == i:
                            continue
                        cand = [list(t) for t in base]
                        cand[w].insert(g, op)
                        try:
                            est = two_pass_estimate(instance, Solution.from_lists(cand))
                        except ScheduleError:
                            continue
                        if est < z - 1e-9:
                            candidates.append((est, cand))
        new_tours = _apply_best_verified(instance, tours, candidates, z)
        if new_tours is None:
            break
        tours = new_tours
    return Solution.from_lists(tours)


def cross_agent_relocation(instance, solution: Solution) -> Solution:
    """Move whole customer assignments (dropoff and pickup together) off the
    bottleneck route onto another vehicle; up to three passes,
    improvement-only, re-identifying the bottleneck each pass."""
    if instance.m == 1:
        return solution
    tours = [list(t) for t in solution.tours]
    for _ in range(3):
        sched = evaluate(instance, Solution.from_lists(tours))
        z = sched.makespan
        b = sched.bottleneck()
        on_route = sorted({c for c, _ in tours[b]})
        candidates = []
        for c in on_route:
            stripped = [[op for op in t if op[0] != c] for t in tours]
            for w in range(instance.m):
                if w == b:
                    continue
                L = len(stripped[w])
                for gd in range(L + 1):
                    for gp in range(gd + 1, L + 2):
                        cand = [list(t) for t in stripped]
                        cand[w].insert(gd, (c, _D))
                        cand[w].insert(gp, (c, _P))
                        try:
                            est = two_pass_estimate(instance, Solution.from_lists(cand))
                        except ScheduleError:
                            continue
                        if est < z - 1e-9:
                            candidates.append((est, cand))
        new_tours = _apply_best_verified(instance, tours, candidates, z)
        if new_tours is None:
            break
        tours = new_tours
    return Solution.from_lists(tours)


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------


def _rng_for(seed: int):
    return np.random.Generator(np.random.PCG64(seed))


def worker_seed(seed: int, worker: int) -> int:
    return int(np.random.SeedSequence([seed, worker]).generate_state(1)[0])


class _PoolShare:
    """Best-incumbent exchange inside one worker pool (thread-safe)."""

    def __init__(self):
        self._lock = threading.Lock()
        self.best_z = math.inf
        self.best_sol = None
        self.src = None

    def offer(self, worker: int, z: float, sol: Solution) -> None:
        with self._lock:
            if z < self.best_z:
                self.best_z, self.best_sol, self.src = z, sol, worker

    def poll(self, worker: int):
        with self._lock:
            if self.best_sol is not None and self.src != worker:
                return self.best_z, self.best_sol
        return None

    def merge(self, other: "_PoolShare") -> None:
        with self._lock:
            mine = (self.best_z, self.best_sol, self.src)
        with other._lock:
            theirs = (other.best_z, other.best_sol, other.src)
            if mine[0] < theirs[0]:
                other.best_z, other.best_sol, other.src = mine[0], mine[1], None
        if theirs[0] < mine[0]:
            with self._lock:
                if theirs[0] < self.best_z:
                    self.best_z, self.best_sol, self.src = theirs[0], theirs[1], None


def run_alns(instance, params: AlnsParams, seed: int, initial: Solution | None = None,
             share: _PoolShare | None = None, global_share: _PoolShare | None = None,
             worker_id: int = 0):
    """Single search trajectory.  Deterministic for a fixed seed when no
    share object is attached.  Returns (best_solution, AlnsStats)."""
    rng = _rng_for(seed)
    current = initial if initial is not None else construct_initial(instance, seed)
    z = exact_makespan(instance, current)
    best, z_best = current, z
    z_init = z

    temperature = params.t0 * z_init
    t_init = temperature
    bank = OperatorBank.fresh()
    stagnation = 0
    q_min, q_max = removal_bounds(instance.n)
    q_min, q_max = min(q_min, instance.n), min(q_max, instance.n)

    stats = AlnsStats(initial_makespan=z_init)
    stats.best_trace.append((0, z_best))
    q_draws = (rng.integers(q_min, q_max + 1, size=params.max_iter)
               if params.max_iter else [])

    def found_best(sol, value, iteration):
        nonlocal best, z_best, stagnation
        best, z_best = sol, value
        stagnation = 0
        stats.best_trace.append((iteration, value))
        if share is not None:
            share.offer(worker_id, value, sol)

    for it in range(1, params.max_iter + 1):
        dname = roulette_select(DESTROY_OPERATORS, bank.weights, rng)
        rname = roulette_select(REPAIR_OPERATORS, bank.weights, rng)
        bank.attempts[dname] += 1
        bank.attempts[rname] += 1
        q = int(q_draws[it - 1])
        try:
            partial, removed = destroy(instance, current, dname, q, rng)
            cand, z_cand = _repair_scored(instance, partial, removed, rname, rng)
        except (RepairFailed, ScheduleError):
            stats.rejected_candidates += 1
        else:
            if z_cand < z:
                current, z = cand, z_cand
                bank.scores[dname] += params.sigma2
                bank.scores[rname] += params.sigma2
                stats.accepted += 1
                if z_cand < z_best:
                    bank.scores[dname] += params.sigma1 - params.sigma2
                    bank.scores[rname] += params.sigma1 - params.sigma2
                    found_best(cand, z_cand, it)
            elif temperature > 0 and rng.random() < math.exp(-(z_cand - z) / temperature):
                current, z = cand, z_cand
                bank.scores[dname] += params.sigma3
                bank.scores[rname] += params.sigma3
                stats.accepted += 1

        temperature *= params.alpha
        stagnation += 1
        if stagnation >= params.stagnation_threshold and temperature < 0.01 * t_init:
            temperature = params.reheat_factor * params.t0 * z_best
            stagnation = 0
            stats.reheats += 1

        if it % params.weight_interval == 0:
            update_weights(bank, params.reaction, params.min_weight)
            stats.weight_rows.append({
                "iteration": it,
                "best_makespan": z_best,
                "temperature": temperature,
                **{f"w_{name}": bank.weights[name] for name in bank.weights},
            })

        # deterministic intensification on the current solution
        if it % params.pickup_reposition_interval == 0:
            improved = pickup_repositioning(instance, current)
            z_new = exact_makespan(instance, improved)
            if z_new < z:
                current, z = improved, z_new
                if z_new < z_best:
                    found_best(improved, z_new, it)
        if it % params.cross_agent_interval == 0:
            improved = cross_agent_relocation(instance, current)
            z_new = exact_makespan(instance, improved)
            if z_new < z:
                current, z = improved, z_new
                if z_new < z_best:
                    found_best(improved, z_new, it)

        if share is not None and it % params.best_check_interval == 0:
            got = share.poll(worker_id)
            if got is not None and got[0] < z:
                z, current = got[0], got[1]
                if z < z_best:
                    best, z_best = current, z
                    stats.best_trace.append((it, z))
        if (share is not None and global_share is not None
                and it % params.pool_sync_interval == 0):
            share.merge(global_share)

    stats.iterations = params.max_iter
    stats.attempts = dict(bank.attempts)
    stats.final_temperature = temperature
    return best, stats


def run_pool(instance, params: AlnsParams, pool_size: int, seed: int,
             initial: Solution | None = None):
    """Run pool_size workers with derived seeds and shared incumbents.

    Workers are grouped into pools of params.workers_per_pool; each pool
    shares a best solution that workers import when strictly better than
    their current one, and pools synchronize through a global incumbent.
    A single worker behaves exactly like run_alns with the derived seed.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    if pool_size == 1:
        best, stats = run_alns(instance, params, worker_seed(seed, 0), initial=initial)
        return best, {"workers": 1, "pools": 1, "best_makespan":
                      evaluate(instance, best).makespan, "worker_stats": [stats]}

    n_pools = (pool_size + params.workers_per_pool - 1) // params.workers_per_pool
    pools = [_PoolShare() for _ in range(n_pools)]
    global_share = _PoolShare() if n_pools > 1 else None
    results: list = [None] * pool_size

    def work(widx: int):
        pool = pools[widx // params.workers_per_pool]
        results[widx] = run_alns(
            instance, params, worker_seed(seed, widx), initial=initial,
            share=pool, global_share=global_share, worker_id=widx)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(pool_size)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    best, z_best = None, math.inf
    for sol, _stats in results:
        z = evaluate(instance, sol).makespan
        if z < z_best:
            best, z_best = sol, z
    for pool in pools:
        if pool.best_sol is not None and pool.best_z < z_best:
            best, z_best = pool.best_sol, pool.best_z
    return best, {"workers": pool_size, "pools": n_pools, "best_makespan": z_best,
                  "worker_stats": [st for _, st in results]}
