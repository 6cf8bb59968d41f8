"""Standalone construction heuristics and the best-of-portfolio reference.

Four constructors (nearest neighbor, max-regret insertion, Clarke-Wright
savings, greedy-defer) plus a local-search polish; ``best_heuristic`` runs
the whole portfolio (greedy-defer at three multiplier settings), polishes
each solution and returns the best.

These are deliberately classical adaptations serving as reference points:
nearest neighbor builds routes sequentially by travel distance, max-regret
inserts same-vehicle dropoff/pickup pairs by added distance, and savings
merging is distance-based.  Only greedy-defer reasons about completion
times (that is its entire point), and only the polish optimizes makespan
directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from . import insertion
from .schedule import (OpKind, ScheduleError, Solution, evaluate,
                       two_pass_estimate)

_D = OpKind.DROPOFF
_P = OpKind.PICKUP


class InstanceInfeasible(Exception):
    """No constructor could produce a feasible solution."""


class BaselineKind(Enum):
    NEAREST_NEIGHBOR = "NearestNeighbor"
    MAX_REGRET = "MaxRegret"
    CLARKE_WRIGHT = "ClarkeWright"
    GREEDY_DEFER = "GreedyDefer"


@dataclass(frozen=True)
class BaselineParams:
    defer_lambda: float = 10.0  # pickup-cost multiplier, sensible range [5, 15]
    move_budget: int | None = None  # two-opt move budget override


# ---------------------------------------------------------------------------
# Sequential nearest-neighbor construction
# ---------------------------------------------------------------------------


def _nn_sequential(instance) -> Solution:
    """Routes built one vehicle at a time by travel distance.

    A vehicle repeatedly serves the closest undropped customer until its
    capacity is exhausted (or none remain), then its candidate set switches
    to pending pickups, soonest-completing first, until it is full again;
    the turn then passes to the next vehicle, wrapping around while work
    remains.  No timing lookahead beyond the forced pickup waits.
    """
    n, m, k = instance.n, instance.m, instance.k
    d, p = instance.d, instance.p
    tours = [[] for _ in range(m)]
    t = [0.0] * m
    loc = [0] * m
    q = [k] * m
    undropped = set(instance.customers)
    unpicked: dict = {}

    v = 0
    guard = 0
    while undropped or unpicked:
        guard += 1
        if guard > 4 * n * m + 8:
            raise InstanceInfeasible("sequential construction stalled")
        while q[v] > 0 and undropped:
            c = min(undropped, key=lambda c: (d[loc[v]][c], c))
            t[v] += d[loc[v]][c]
            loc[v] = c
            q[v] -= 1
            undropped.discard(c)
            unpicked[c] = t[v] + p[c]
            tours[v].append((c, _D))
        while q[v] < k and unpicked:
            best = None
            for c, ready in unpicked.items():
                arr = t[v] + d[loc[v]][c]
                key = (arr if arr >= ready else ready, c)
                if best is None or key < best:
                    best = key
            comp, c = best
            t[v] = comp
            loc[v] = c
            q[v] += 1
            unpicked.pop(c)
            tours[v].append((c, _P))
        v = (v + 1) % m
    return Solution.from_lists(tours)


# ---------------------------------------------------------------------------
# Max-regret pair insertion (distance objective)
# ---------------------------------------------------------------------------


def _route_length(seq, d) -> float:
    t, loc = 0.0, 0
    for c, _kind in seq:
        t += d[loc][c]
        loc = c
    return t + (d[loc][0] if seq else 0.0)


def _pair_feasible(seq, k: int) -> bool:
    s, lo, hi = 0, 0, k
    for _c, kind in seq:
        if kind is _D:
            lo = max(lo, 1 - s)
            s -= 1
        else:
            hi = min(hi, k - 1 - s)
            s += 1
        if lo > hi:
            return False
    return True


def _regret_pair_insertion(instance) -> Solution:
    """Insert each customer's dropoff/pickup pair into one route at the
    added-distance-cheapest feasible positions; the customer whose best and
    second-best insertions differ most (max regret) goes first."""
    d, k = instance.d, instance.k
    tours = [[] for _ in range(instance.m)]
    lengths = [0.0] * instance.m
    remaining = sorted(instance.customers)

    def candidate_costs(c):
        out = []
        for v, seq in enumerate(tours):
            L = len(seq)
            for i in range(L + 1):
                for j in range(i + 1, L + 2):
                    cand = list(seq)
                    cand.insert(i, (c, _D))
                    cand.insert(j, (c, _P))
                    if not _pair_feasible(cand, k):
                        continue
                    out.append((_route_length(cand, d) - lengths[v], v, i, j))
        out.sort(key=lambda x: (x[0], x[1], x[2], x[3]))
        return out

    while remaining:
        chosen = None
        for c in remaining:
            costs = candidate_costs(c)
            if not costs:
                raise InstanceInfeasible(f"no feasible pair insertion for {c}")
            regret = (costs[1][0] - costs[0][0]) if len(costs) > 1 else float("inf")
            key = (-regret, costs[0][0], c)
            if chosen is None or key < chosen[0]:
                chosen = (key, c, costs[0])
        _, c, (delta, v, i, j) = chosen
        tours[v].insert(i, (c, _D))
        tours[v].insert(j, (c, _P))
        lengths[v] += delta
        remaining.remove(c)
    return Solution.from_lists(tours)


# ---------------------------------------------------------------------------
# Greedy defer (sequential, pickup costs scaled by the deferral multiplier)
# ---------------------------------------------------------------------------


def greedy_defer_construct(instance, defer_lambda: float):
    """Sequential construction where each step takes the operation with the
    lowest perceived cost: raw travel for dropoffs, travel-plus-wait scaled
    by the deferral multiplier for pickups.  A vehicle's turn lasts until it
    is back at full capacity, then the next vehicle continues.

    Also returns the decision log: each pickup decision records its raw
    cost and the raw dropoff costs available to the vehicle at that moment.
    """
    if not 5.0 <= defer_lambda <= 15.0:
        raise ValueError("defer multiplier must lie in [5, 15]")
    n, m, k = instance.n, instance.m, instance.k
    d, p = instance.d, instance.p
    log: list = []
    tours = [[] for _ in range(m)]
    t = [0.0] * m
    loc = [0] * m
    q = [k] * m
    undropped = set(instance.customers)
    unpicked: dict = {}  # customer -> ready time, once dropped

    v = 0
    remaining = 2 * n
    guard = 0
    while remaining:
        guard += 1
        if guard > 4 * n * m + 8:
            raise InstanceInfeasible("greedy-defer construction stalled")
        while True:
            drop_costs = []
            if q[v] > 0:
                drop_costs = [(d[loc[v]][c], c) for c in undropped]
            pick_costs = []
            if q[v] < k:
                for c, ready in unpicked.items():
                    arr = t[v] + d[loc[v]][c]
                    dep = arr if arr >= ready else ready
                    pick_costs.append((dep - t[v], c))
            best = None
            for cost, c in drop_costs:
                key = (cost, 0, c)
                if best is None or key < best:
                    best = key
            for cost, c in pick_costs:
                key = (cost * defer_lambda, 1, c)
                if best is None or key < best:
                    best = key
            if best is None:
                break
            _, is_pick, c = best
            if is_pick:
                raw = next(rc for rc, cc in pick_costs if cc == c)
                log.append({
                    "pickup_cost": raw,
                    "drop_costs": [rc for rc, _ in drop_costs],
                })
                arr = t[v] + d[loc[v]][c]
                ready = unpicked.pop(c)
                t[v] = arr if arr >= ready else ready
                q[v] += 1
                tours[v].append((c, _P))
            else:
                t[v] += d[loc[v]][c]
                undropped.discard(c)
                unpicked[c] = t[v] + p[c]
                q[v] -= 1
                tours[v].append((c, _D))
            loc[v] = c
            remaining -= 1
            # turn ends once the vehicle is whole again
            if q[v] == k:
                break
        v = (v + 1) % m
    return Solution.from_lists(tours), log


# ---------------------------------------------------------------------------
# Clarke-Wright savings
# ---------------------------------------------------------------------------


def clarke_wright_savings(instance) -> list:
    """Savings list s_ij = d(0,i) + d(0,j) - d(i,j), descending."""
    d = instance.d
    out = []
    for i in instance.customers:
        for j in instance.customers:
            if i < j:
                out.append((d[0][i] + d[0][j] - d[i][j], i, j))
    out.sort(key=lambda s: (-s[0], s[1], s[2]))
    return out


def _clarke_wright_segments(instance) -> list:
    """Merge dropoff-only segments by savings, capped at k customers each
    (a vehicle cannot hold more than k un-picked dropoffs in a row)."""
    k = instance.k
    segment_of = {c: c for c in instance.customers}
    segments = {c: [c] for c in instance.customers}
    for _, i, j in clarke_wright_savings(instance):
        si, sj = segment_of[i], segment_of[j]
        if si == sj:
            continue
        a, b = segments[si], segments[sj]
        if len(a) + len(b) > k:
            continue
        # endpoint merges only, reorienting as needed
        if a[-1] == i and b[0] == j:
            merged = a + b
        elif a[-1] == i and b[-1] == j:
            merged = a + b[::-1]
        elif a[0] == i and b[0] == j:
            merged = a[::-1] + b
        elif a[0] == i and b[-1] == j:
            merged = b + a
        else:
            continue
        del segments[sj]
        segments[si] = merged
        for c in merged:
            segment_of[c] = si
    return sorted(segments.values(), key=lambda seg: (-len(seg), seg[0]))


def _clarke_wright_construct(instance, same_route_pickups: bool = False) -> Solution:
    d = instance.d
    segments = _clarke_wright_segments(instance)

    def seg_travel(seg):
        t = d[0][seg[0]]
        for x, y in zip(seg, seg[1:]):
            t += d[x][y]
        return t + d[seg[-1]][0]

    # longest segments first onto the least-loaded vehicle
    load = [0.0] * instance.m
    assigned = [[] for _ in range(instance.m)]
    for seg in sorted(segments, key=lambda s: (-seg_travel(s), s[0])):
        v = min(range(instance.m), key=lambda w: (load[w], w))
        assigned[v].append(seg)
        load[v] += seg_travel(seg)

    ctx = insertion.InsertionContext(instance, [[] for _ in range(instance.m)])
    for v in range(instance.m):
        for seg in assigned[v]:
            for c in seg:
                gaps = ctx.eval_gaps(v, c, _D)
                if gaps:
                    end = max(g for g, _, _ in gaps)
                    ctx.commit(v, end, c, _D)
                    continue
                # capacity exhausted mid-assembly: fall back to any vehicle
                placed = False
                for w in range(instance.m):
                    gaps = ctx.eval_gaps(w, c, _D)
                    if gaps:
                        ctx.commit(w, max(g for g, _, _ in gaps), c, _D)
                        placed = True
                        break
                if not placed:
                    raise InstanceInfeasible(f"cannot place dropoff of {c}")
            # this segment's pickups, cheapest feasible position anywhere
            # (or on the dropoff vehicle only, see deadlock fallback below)
            pending = list(seg)
            while pending:
                best = None
                for c in pending:
                    if same_route_pickups:
                        wheels = (ctx.pos_d[c][0],)
                    else:
                        wheels = range(instance.m)
                    for w in wheels:
                        for g, new_ret, stale in ctx.eval_gaps(w, c, _P):
                            key = (ctx.cost_of(w, new_ret), stale, w, g, c)
                            if best is None or key < best:
                                best = key
                if best is None:
                    raise InstanceInfeasible("cannot place pickups")
                _, _, w, g, c = best
                ctx.commit(w, g, c, _P)
                pending.remove(c)
    sol = ctx.solution()
    try:
        evaluate(instance, sol)
    except ScheduleError:
        # cross-vehicle pickup placements can form a circular wait; retry
        # with every pickup kept on its dropoff vehicle, which cannot cycle
        if same_route_pickups:
            raise
        return _clarke_wright_construct(instance, same_route_pickups=True)
    return sol


# ---------------------------------------------------------------------------
# Local search polish
# ---------------------------------------------------------------------------


def two_opt_improve(instance, solution: Solution, move_budget: int | None = None) -> Solution:
    """First-improvement local search: intra-route 2-opt segment reversal,
    single-operation relocation (intra- and inter-route) and pairwise swaps.

    Every candidate is re-scored with the exact evaluator; moves that break
    capacity or deadlock are rejected.  Stops at a fixed point or after the
    move budget (default 50n evaluated moves, which bounds runtime on the
    largest benchmark instances)."""
    budget = move_budget if move_budget is not None else 50 * instance.n
    tours = [list(t) for t in solution.tours]
    best = evaluate(instance, solution).makespan

    def try_candidate(cand):
        nonlocal budget
        budget -= 1
        try:
            z = evaluate(instance, Solution.from_lists(cand)).makespan
        except ScheduleError:
            return None
        return z

    improved = True
    while improved and budget > 0:
        improved = False
        # intra-route 2-opt
        for v, tour in enumerate(tours):
            L = len(tour)
            for i in range(L - 1):
                for j in range(i + 1, L):
                    if budget <= 0:
                        break
                    cand = [list(t) for t in tours]
                    cand[v][i:j + 1] = cand[v][i:j + 1][::-1]
                    z = try_candidate(cand)
                    if z is not None and z < best - 1e-9:
                        tours, best, improved = cand, z, True
                        break
                if improved or budget <= 0:
                    break
            if improved or budget <= 0:
                break
        if improved:
            continue
        # relocate one operation
        for v, tour in enumerate(tours):
            for i in range(len(tour)):
                for w in range(len(tours)):
                    L_w = len(tours[w]) - (1 if w == v else 0)
                    for g in range(L_w + 1):
                        if w == v and g == i:
                            continue
                        if budget <= 0:
                            break
                        cand = [list(t) for t in tours]
                        op = cand[v].pop(i)
                        cand[w].insert(g, op)
                        z = try_candidate(cand)
                        if z is not None and z < best - 1e-9:
                            tours, best, improved = cand, z, True
                            break
                    if improved or budget <= 0:
                        break
                if improved or budget <= 0:
                    break
            if improved or budget <= 0:
                break
        if improved:
            continue
        # pairwise swap
        flat = [(v, i) for v, tour in enumerate(tours) for i in range(len(tour))]
        for a in range(len(flat)):
            for b in range(a + 1, len(flat)):
                if budget <= 0:
                    break
                (v, i), (w, j) = flat[a], flat[b]
                cand = [list(t) for t in tours]
                cand[v][i], cand[w][j] = cand[w][j], cand[v][i]
                z = try_candidate(cand)
                if z is not None and z < best - 1e-9:
                    tours, best, improved = cand, z, True
                    break
            if improved or budget <= 0:
                break
    return Solution.from_lists(tours)


# ---------------------------------------------------------------------------
# Portfolio
# ---------------------------------------------------------------------------


def run_baseline(instance, kind: BaselineKind, params: BaselineParams | None = None,
                 seed: int = 0) -> Solution:
    """Run one constructor; the result always evaluates without error."""
    params = params or BaselineParams()
    if kind is BaselineKind.NEAREST_NEIGHBOR:
        sol = _nn_sequential(instance)
    elif kind is BaselineKind.GREEDY_DEFER:
        sol, _ = greedy_defer_construct(instance, params.defer_lambda)
    elif kind is BaselineKind.MAX_REGRET:
        sol = _regret_pair_insertion(instance)
    elif kind is BaselineKind.CLARKE_WRIGHT:
        sol = _clarke_wright_construct(instance)
    else:
        raise ValueError(f"unknown baseline {kind}")
    evaluate(instance, sol)
    return sol


def best_heuristic(instance, seed: int = 0) -> Solution:
    """Best of the full constructor portfolio (greedy-defer at multipliers
    5, 10 and 15), each polished by local search."""
    candidates = [
        run_baseline(instance, BaselineKind.NEAREST_NEIGHBOR, seed=seed),
        run_baseline(instance, BaselineKind.MAX_REGRET, seed=seed),
        run_baseline(instance, BaselineKind.CLARKE_WRIGHT, seed=seed),
    ]
    for lam in (5.0, 10.0, 15.0):
        candidates.append(run_baseline(
            instance, BaselineKind.GREEDY_DEFER, BaselineParams(defer_lambda=lam), seed))
    best_sol, best_z = None, None
    for cand in candidates:
        polished = two_opt_improve(instance, cand)
        z = evaluate(instance, polished).makespan
        if best_z is None or z < best_z:
            best_sol, best_z = polished, z
    return best_sol
