"""Exact optimum for tiny instances and LP-format model export.

The exact solver does depth-first branch and bound over global operation
sequences: a state holds every vehicle's clock, location and capacity
interval plus the sets of dropped and picked customers; children assign any
feasible next (operation, vehicle) pair, with on-site waiting allowed.
Lower bounds use shortest-path return distances so no metric assumption is
needed.  Identical untouched vehicles are interchangeable, so only the
first of them may receive an operation.

The exporter writes the complete mixed-integer formulation in CPLEX-LP
syntax for external validation; it is a faithful transcription of the
timing/capacity constraint system (vehicles leave the depot full and must
depart it exactly once there, both stricter than the simulator; documented
divergences).
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass

from .schedule import OpKind, Solution, evaluate

_D = OpKind.DROPOFF
_P = OpKind.PICKUP


class InstanceTooLarge(Exception):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_customers: int = 6
    max_nodes: int = 5_000_000
    time_budget: float = 120.0  # seconds

    def __post_init__(self):
        if self.max_customers > 8:
            raise ValueError("exhaustive search is hopeless beyond 8 customers")


@dataclass
class OracleResult:
    solution: Solution
    makespan: float
    optimal: bool
    nodes: int


def _shortest_paths(d, size: int):
    sp = [list(row) for row in d]
    for mid in range(size):
        row_m = sp[mid]
        for i in range(size):
            via = sp[i][mid]
            row_i = sp[i]
            for j in range(size):
                alt = via + row_m[j]
                if alt < row_i[j]:
                    row_i[j] = alt
    return sp


def exact_solve(instance, limits: OracleLimits | None = None) -> OracleResult:
    """Provably optimal solution under the schedule evaluator's semantics,
    or the best found with optimal=False when a budget runs out."""
    limits = limits or OracleLimits()
    n, m, k = instance.n, instance.m, instance.k
    if n > limits.max_customers:
        raise InstanceTooLarge(f"{n} customers exceeds limit {limits.max_customers}")
    d, p = instance.d, instance.p
    sp = _shortest_paths(d, n + 1)
    customers = list(instance.customers)

    # serial single-vehicle schedule as the initial incumbent
    serial = [[] for _ in range(m)]
    serial[0] = [op for c in customers for op in ((c, _D), (c, _P))]
    inc_sol = Solution.from_lists(serial)
    inc_z = evaluate(instance, inc_sol).makespan

    t = [0.0] * m
    loc = [0] * m
    net = [0] * m
    lo = [0] * m
    hi = [k] * m
    tours = [[] for _ in range(m)]
    dropped = [False] * (n + 1)
    picked = [False] * (n + 1)
    t_drop = [0.0] * (n + 1)
    state = {"nodes": 0, "exhausted": False}
    deadline = _time.monotonic() + limits.time_budget

    def lower_bound() -> float:
        lb = 0.0
        for v in range(m):
            r = t[v] + sp[loc[v]][0]
            if r > lb:
                lb = r
        for c in customers:
            if dropped[c]:
                if not picked[c]:
                    r = t_drop[c] + p[c] + sp[c][0]
                    if r > lb:
                        lb = r
            else:
                arr = min(t[v] + sp[loc[v]][c] for v in range(m))
                r = arr + p[c] + sp[c][0]
                if r > lb:
                    lb = r
        return lb

    def branches():
        out = []
        seen_untouched = False
        seen_states = []
        for v in range(m):
            key = (t[v], loc[v], net[v], lo[v], hi[v])
            if not tours[v]:
                if seen_untouched:
                    continue
                seen_untouched = True
            elif key in seen_states:
                continue  # identical vehicles are interchangeable
            seen_states.append(key)
            can_drop = max(lo[v], 1 - net[v]) <= hi[v]
            can_pick = lo[v] <= min(hi[v], k - 1 - net[v])
            for c in customers:
                if not dropped[c]:
                    if can_drop:
                        out.append((t[v] + d[loc[v]][c], c, _D, v))
                elif not picked[c] and can_pick:
                    arr = t[v] + d[loc[v]][c]
                    ready = t_drop[c] + p[c]
                    out.append((arr if arr >= ready else ready, c, _P, v))
        out.sort()
        return out

    def dfs(remaining: int):
        nonlocal inc_sol, inc_z
        state["nodes"] += 1
        if state["nodes"] > limits.max_nodes or _time.monotonic() > deadline:
            state["exhausted"] = True
            return
        if remaining == 0:
            z = max(t[v] + d[loc[v]][0] if tours[v] else 0.0 for v in range(m))
            if z < inc_z:
                inc_z = z
                inc_sol = Solution.from_lists(tours)
            return
        if lower_bound() >= inc_z:
            return
        for comp, c, kind, v in branches():
            if state["exhausted"]:
                return
            old = (t[v], loc[v], net[v], lo[v], hi[v])
            t[v] = comp
            loc[v] = c
            tours[v].append((c, kind))
            if kind is _D:
                need = 1 - net[v]
                if need > lo[v]:
                    lo[v] = need
                net[v] -= 1
                dropped[c] = True
                t_drop[c] = comp
                dfs(remaining - 1)
                dropped[c] = False
            else:
                room = k - 1 - net[v]
                if room < hi[v]:
                    hi[v] = room
                net[v] += 1
                picked[c] = True
                dfs(remaining - 1)
                picked[c] = False
            tours[v].pop()
            t[v], loc[v], net[v], lo[v], hi[v] = old

    dfs(2 * n)
    return OracleResult(
        solution=inc_sol,
        makespan=inc_z,
        optimal=not state["exhausted"],
        nodes=state["nodes"],
    )


# ---------------------------------------------------------------------------
# LP-format export
# ---------------------------------------------------------------------------


def default_big_m(instance) -> float:
    """Valid makespan upper bound: serve every customer with a dedicated
    depot round trip, plus one extra return leg."""
    total = sum(2.0 * instance.d[0][c] + instance.p[c] for c in instance.customers)
    return total + max(instance.d[0][c] for c in instance.customers)


def _num(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def export_milp(instance, big_m: float | None = None) -> str:
    """Complete mixed-integer formulation in CPLEX-LP text format.

    Variable naming: x_i_j_v (arc), y_c_v (visit), del_c_v / pi_c_v
    (operation assignment), t_c_v / tdep_c_v (arrival/departure),
    Tdrop_c / Tpick_c (realized operation times), q_c_v (load after
    service), u_c_v (route position), tret_v (return), T (makespan).
    Vehicles are numbered 1..m, locations 0..n with 0 the depot.
    """
    n, m, k = instance.n, instance.m, instance.k
    d, p = instance.d, instance.p
    M = big_m if big_m is not None else default_big_m(instance)
    Ms = _num(M)
    locs = range(n + 1)
    cs = range(1, n + 1)
    vs = range(1, m + 1)

    rows = []

    def add(name: str, expr: str):
        rows.append(f" {name}: {expr}")

    for c in cs:  # each customer gets exactly one dropoff and one pickup
        add(f"svc_d_{c}", " + ".join(f"del_{c}_{v}" for v in vs) + " = 1")
        add(f"svc_p_{c}", " + ".join(f"pi_{c}_{v}" for v in vs) + " = 1")
    for v in vs:  # every vehicle leaves and re-enters the depot once
        add(f"depot_out_{v}", " + ".join(f"x_0_{j}_{v}" for j in cs) + " = 1")
        add(f"depot_in_{v}", " + ".join(f"x_{i}_0_{v}" for i in cs) + " = 1")
    for v in vs:  # time anchored at the depot
        add(f"t0_{v}", f"t_0_{v} = 0")
        add(f"tdep0_{v}", f"tdep_0_{v} = 0")
    for c in cs:  # flow conservation defines visits
        for v in vs:
            terms = " + ".join(f"x_{i}_{c}_{v}" for i in locs if i != c)
            add(f"flow_in_{c}_{v}", f"{terms} - y_{c}_{v} = 0")
            terms = " + ".join(f"x_{c}_{j}_{v}" for j in locs if j != c)
            add(f"flow_out_{c}_{v}", f"{terms} - y_{c}_{v} = 0")
    for i in locs:  # no self loops
        for v in vs:
            add(f"noself_{i}_{v}", f"x_{i}_{i}_{v} = 0")
    for c in cs:  # operations require a visit
        for v in vs:
            add(f"visit_d_{c}_{v}", f"del_{c}_{v} - y_{c}_{v} <= 0")
            add(f"visit_p_{c}_{v}", f"pi_{c}_{v} - y_{c}_{v} <= 0")
    for c in cs:  # dropoff happens at arrival of its vehicle
        for v in vs:
            add(f"dropt_lo_{c}_{v}", f"Tdrop_{c} - t_{c}_{v} + {Ms} del_{c}_{v} <= {Ms}")
            add(f"dropt_hi_{c}_{v}", f"t_{c}_{v} - Tdrop_{c} + {Ms} del_{c}_{v} <= {Ms}")
    for c in cs:  # pickup happens at departure of its vehicle
        for v in vs:
            add(f"pickt_lo_{c}_{v}", f"Tpick_{c} - tdep_{c}_{v} + {Ms} pi_{c}_{v} <= {Ms}")
            add(f"pickt_hi_{c}_{v}", f"tdep_{c}_{v} - Tpick_{c} + {Ms} pi_{c}_{v} <= {Ms}")
    for c in cs:  # processing precedes pickup, independent of vehicles
        add(f"prec_{c}", f"Tpick_{c} - Tdrop_{c} >= {_num(p[c])}")
    for c in cs:
        for v in vs:
            add(f"depge_{c}_{v}", f"tdep_{c}_{v} - t_{c}_{v} >= 0")
            # a vehicle doing both operations waits out the processing
            add(f"wait_{c}_{v}",
                f"tdep_{c}_{v} - t_{c}_{v} - {_num(p[c])} del_{c}_{v}"
                f" - {_num(p[c])} pi_{c}_{v} >= {_num(-p[c])}")
    for i in locs:  # travel-time propagation along used arcs
        for j in cs:
            if i == j:
                continue
            for v in vs:
                add(f"prop_{i}_{j}_{v}",
                    f"t_{j}_{v} - tdep_{i}_{v} - {Ms} x_{i}_{j}_{v} >= {_num(d[i][j] - M)}")
    for v in vs:  # full load on departure
        add(f"q0_{v}", f"q_0_{v} = {_num(k)}")
    for i in locs:  # load propagation and capacity gating on used arcs
        for j in cs:
            if i == j:
                continue
            for v in vs:
                add(f"cap_lo_{i}_{j}_{v}",
                    f"q_{j}_{v} - q_{i}_{v} + del_{j}_{v} - pi_{j}_{v}"
                    f" - {Ms} x_{i}_{j}_{v} >= {_num(-M)}")
                add(f"cap_hi_{i}_{j}_{v}",
                    f"q_{j}_{v} - q_{i}_{v} + del_{j}_{v} - pi_{j}_{v}"
                    f" + {Ms} x_{i}_{j}_{v} <= {Ms}")
                add(f"res_{i}_{j}_{v}",
                    f"q_{i}_{v} - del_{j}_{v} - {Ms} x_{i}_{j}_{v} >= {_num(-M)}")
                add(f"pcap_{i}_{j}_{v}",
                    f"q_{i}_{v} + pi_{j}_{v} + {Ms} x_{i}_{j}_{v} <= {_num(k + M)}")
    for i in cs:  # position-based subtour elimination
        for j in cs:
            if i == j:
                continue
            for v in vs:
                add(f"mtz_{i}_{j}_{v}",
                    f"u_{i}_{v} - u_{j}_{v} + {n} x_{i}_{j}_{v} <= {n - 1}")
    for c in cs:  # return time from the last customer
        for v in vs:
            add(f"ret_{c}_{v}",
                f"tret_{v} - tdep_{c}_{v} - {Ms} x_{c}_0_{v} >= {_num(d[c][0] - M)}")
    for v in vs:  # makespan dominates every return
        add(f"mk_{v}", f"T - tret_{v} >= 0")

    bounds = []
    for i in locs:
        for v in vs:
            bounds.append(f" q_{i}_{v} <= {_num(k)}")
    for c in cs:
        for v in vs:
            bounds.append(f" 1 <= u_{c}_{v} <= {n}")

    binaries = []
    for v in vs:
        for i in locs:
            for j in locs:
                binaries.append(f"x_{i}_{j}_{v}")
    for c in cs:
        for v in vs:
            binaries.extend((f"y_{c}_{v}", f"del_{c}_{v}", f"pi_{c}_{v}"))
    generals = [f"u_{c}_{v}" for c in cs for v in vs]

    out = [f"\\ {instance.label or 'vrp-rpd'}: n={n} m={m} k={k} M={Ms}"]
    out.append("Minimize")
    out.append(" obj: T")
    out.append("Subject To")
    out.extend(rows)
    out.append("Bounds")
    out.extend(bounds)
    out.append("Binaries")
    for i in range(0, len(binaries), 8):
        out.append(" " + " ".join(binaries[i:i + 8]))
    out.append("Generals")
    for i in range(0, len(generals), 8):
        out.append(" " + " ".join(generals[i:i + 8]))
    out.append("End")
    return "\n".join(out) + "\n"
