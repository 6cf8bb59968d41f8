"""Solution representation and exact event-driven schedule evaluation.

A solution assigns every customer exactly one dropoff and one pickup across
the vehicle tours; the two operations may sit on different vehicles.  The
evaluator replays the tours as events: a dropoff executes on arrival and
consumes one carried resource, a pickup executes at departure, waits on-site
until the resource has finished processing, and restores one unit of
capacity.  Cross-vehicle precedence (a pickup whose dropoff another vehicle
has not performed yet) blocks the pickup vehicle; circular blocking is a
deadlock.

Each vehicle leaves the depot with the smallest initial load its route
requires, anywhere in [0, k].  A dedicated retrieval vehicle may therefore
start empty; a route is capacity-infeasible only when no initial load in
[0, k] can serve it.  Capacity never affects event times, so feasibility is
a pure prefix-sum interval test per route.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class OpKind(Enum):
    DROPOFF = "D"
    PICKUP = "P"


class ScheduleError(Exception):
    """Base class for evaluation failures."""


class MalformedSolution(ScheduleError):
    """Solution breaks the one-dropoff/one-pickup-per-customer structure."""


class CapacityViolation(ScheduleError):
    """No initial load in [0, k] lets the route execute all its operations."""


class Deadlock(ScheduleError):
    """Circular cross-vehicle waits: no vehicle can make progress."""


@dataclass(frozen=True)
class Solution:
    """Per-vehicle ordered tours of (customer, OpKind) pairs."""

    tours: tuple

    @classmethod
    def from_lists(cls, tours) -> "Solution":
        return cls(tuple(tuple((c, OpKind(k) if not isinstance(k, OpKind) else k)
                               for c, k in tour) for tour in tours))

    def to_lists(self):
        return [[(c, kind) for c, kind in tour] for tour in self.tours]

    def to_dict(self, instance_label: str = "") -> dict:
        return {
            "instance_label": instance_label,
            "tours": [[[c, kind.value] for c, kind in tour] for tour in self.tours],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Solution":
        return cls.from_lists([[(int(c), OpKind(k)) for c, k in tour]
                               for tour in doc["tours"]])

    def save(self, path, instance_label: str = "") -> None:
        Path(path).write_text(json.dumps(self.to_dict(instance_label)), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Solution":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Event:
    """One executed operation: arrival, execution time and capacity after."""

    customer: int
    kind: OpKind
    arrival: float
    time: float  # dropoffs execute at arrival, pickups at departure
    q_after: int


@dataclass
class Schedule:
    """Realized event times and capacity trajectories for a solution."""

    t_drop: dict
    t_pickup: dict
    drop_vehicle: dict
    pickup_vehicle: dict
    returns: list
    makespan: float
    events: list  # per vehicle, list[Event]
    initial_loads: list

    def bottleneck(self) -> int:
        best = 0
        for v, r in enumerate(self.returns):
            if r > self.returns[best]:
                best = v
        return best

    def to_rows(self) -> list:
        rows = []
        for v, evs in enumerate(self.events):
            for seq, ev in enumerate(evs):
                rows.append({
                    "vehicle": v,
                    "seq": seq,
                    "customer": ev.customer,
                    "op": ev.kind.value,
                    "arrival": ev.arrival,
                    "time": ev.time,
                    "q_after": ev.q_after,
                })
        return rows


@dataclass(frozen=True)
class CoordinationMetrics:
    cross_agent_pct: float
    interleaved_pct: float


def validate_solution(instance, solution: Solution) -> None:
    """Raise MalformedSolution unless every customer appears exactly once
    with a dropoff and exactly once with a pickup across all tours."""
    if len(solution.tours) != instance.m:
        raise MalformedSolution(
            f"solution has {len(solution.tours)} tours for {instance.m} vehicles"
        )
    drops = set()
    picks = set()
    for tour in solution.tours:
        for c, kind in tour:
            if not 1 <= c <= instance.n:
                raise MalformedSolution(f"unknown customer {c}")
            target = drops if kind is OpKind.DROPOFF else picks
            if c in target:
                raise MalformedSolution(f"customer {c} has duplicate {kind.value}")
            target.add(c)
    missing_d = set(instance.customers) - drops
    missing_p = set(instance.customers) - picks
    if missing_d or missing_p:
        raise MalformedSolution(
            f"missing dropoffs {sorted(missing_d)} / pickups {sorted(missing_p)}"
        )


def route_initial_load(tour, k: int) -> int:
    """Minimal feasible initial load for a route, or CapacityViolation.

    Walking the route, a dropoff at net prefix S needs q0 >= 1 - S and a
    pickup allows at most q0 <= k - 1 - S; the route is feasible iff the
    constraint interval intersected with [0, k] is non-empty.
    """
    s = 0
    lo, hi = 0, k
    for c, kind in tour:
        if kind is OpKind.DROPOFF:
            need = 1 - s
            if need > lo:
                lo = need
            if lo > hi:
                raise CapacityViolation(
                    f"dropoff at {c} needs more than {k} resources aboard"
                )
            s -= 1
        else:
            room = k - 1 - s
            if room < hi:
                hi = room
            if lo > hi:
                raise CapacityViolation(f"pickup at {c} exceeds capacity {k}")
            s += 1
    return lo


def evaluate(instance, solution: Solution) -> Schedule:
    """Exact event-driven evaluation of a solution.

    The global loop advances whichever vehicle can progress; a full round
    with no progress while operations remain means a circular cross-vehicle
    wait.  Capacity feasibility is structural and checked up front.
    """
    validate_solution(instance, solution)
    m, k, d, p = instance.m, instance.k, instance.d, instance.p
    tours = solution.tours
    q0 = [route_initial_load(tour, k) for tour in tours]

    pos = [0] * m
    time = [0.0] * m
    loc = [0] * m
    q = list(q0)
    arrival = [None] * m  # arrival at the pending op, fixed on first visit

    t_drop: dict = {}
    t_pickup: dict = {}
    drop_vehicle: dict = {}
    pickup_vehicle: dict = {}
    events = [[] for _ in range(m)]
    remaining = sum(len(t) for t in tours)

    while remaining:
        progress = False
        for v in range(m):
            tour = tours[v]
            while pos[v] < len(tour):
                c, kind = tour[pos[v]]
                if arrival[v] is None:
                    arrival[v] = time[v] + d[loc[v]][c]
                arr = arrival[v]
                if kind is OpKind.DROPOFF:
                    q[v] -= 1
                    t_drop[c] = arr
                    drop_vehicle[c] = v
                    time[v] = arr
                    events[v].append(Event(c, kind, arr, arr, q[v]))
                else:
                    if c not in t_drop:
                        break  # blocked until some vehicle performs the dropoff
                    ready = t_drop[c] + p[c]
                    dep = arr if arr >= ready else ready
                    q[v] += 1
                    t_pickup[c] = dep
                    pickup_vehicle[c] = v
                    time[v] = dep
                    events[v].append(Event(c, kind, arr, dep, q[v]))
                loc[v] = c
                pos[v] += 1
                arrival[v] = None
                remaining -= 1
                progress = True
        if not progress:
            stuck = [(v, tours[v][pos[v]][0]) for v in range(m) if pos[v] < len(tours[v])]
            raise Deadlock(f"circular cross-vehicle waits, blocked at {stuck}")

    returns = [time[v] + d[loc[v]][0] if tours[v] else 0.0 for v in range(m)]
    return Schedule(
        t_drop=t_drop,
        t_pickup=t_pickup,
        drop_vehicle=drop_vehicle,
        pickup_vehicle=pickup_vehicle,
        returns=returns,
        makespan=max(returns) if returns else 0.0,
        events=events,
        initial_loads=q0,
    )


def makespan(schedule: Schedule) -> float:
    """Maximum over vehicles of the depot return time."""
    return max(schedule.returns) if schedule.returns else 0.0


def exact_makespan(instance, solution: Solution) -> float:
    """Makespan under exactly :func:`evaluate`'s semantics, without building
    event records or re-validating structure.  For search inner loops whose
    candidates are structurally valid by construction; raises the same
    CapacityViolation / Deadlock errors."""
    m, k, d, p = instance.m, instance.k, instance.d, instance.p
    tours = solution.tours
    for tour in tours:
        route_initial_load(tour, k)

    pos = [0] * m
    time = [0.0] * m
    loc = [0] * m
    t_drop: dict = {}
    remaining = sum(len(t) for t in tours)
    drop_kind = OpKind.DROPOFF
    while remaining:
        progress = False
        for v in range(m):
            tour = tours[v]
            i = pos[v]
            L = len(tour)
            t = time[v]
            at = loc[v]
            while i < L:
                c, kind = tour[i]
                if kind is drop_kind:
                    t += d[at][c]
                    t_drop[c] = t
                else:
                    if c not in t_drop:
                        break
                    arr = t + d[at][c]
                    ready = t_drop[c] + p[c]
                    t = arr if arr >= ready else ready
                at = c
                i += 1
            if i != pos[v]:
                remaining -= i - pos[v]
                pos[v] = i
                time[v] = t
                loc[v] = at
                progress = True
        if not progress:
            raise Deadlock("circular cross-vehicle waits")
    best = 0.0
    for v in range(m):
        if tours[v]:
            r = time[v] + d[loc[v]][0]
            if r > best:
                best = r
    return best


def coordination_metrics(instance, solution: Solution, schedule: Schedule) -> CoordinationMetrics:
    """Cross-agent and interleaved percentages of a realized schedule.

    A customer is cross-agent when different vehicles perform its dropoff and
    pickup.  It is interleaved when either of those two vehicles executes an
    operation for another customer strictly inside the open time window
    between its dropoff and its pickup.
    """
    n = instance.n
    cross = sum(
        1 for c in instance.customers
        if schedule.drop_vehicle[c] != schedule.pickup_vehicle[c]
    )
    interleaved = 0
    for c in instance.customers:
        lo, hi = schedule.t_drop[c], schedule.t_pickup[c]
        vehicles = {schedule.drop_vehicle[c], schedule.pickup_vehicle[c]}
        if any(ev.customer != c and lo < ev.time < hi
               for v in vehicles for ev in schedule.events[v]):
            interleaved += 1
    return CoordinationMetrics(
        cross_agent_pct=100.0 * cross / n,
        interleaved_pct=100.0 * interleaved / n,
    )


def two_pass_estimate(instance, solution: Solution) -> float:
    """Fast approximate makespan for insertion-cost ranking.

    Pass 1 walks every route with zero pickup waits and records each
    customer's dropoff time, which fixes pickup-ready times.  Pass 2 rewalks
    the routes applying max(arrival, ready) waits at pickups.  The result is
    exact whenever no dropoff time depends on an earlier pickup wait; search
    code must re-score retained candidates with :func:`evaluate`.
    """
    validate_solution(instance, solution)
    d, p, k = instance.d, instance.p, instance.k
    tours = solution.tours
    for tour in tours:
        route_initial_load(tour, k)

    # A pickup sequenced before its own dropoff on the same route can never
    # unblock; report it as the deadlock it is (without cycle analysis).
    for tour in tours:
        seen_drop = set()
        drops_here = {c for c, kind in tour if kind is OpKind.DROPOFF}
        for c, kind in tour:
            if kind is OpKind.DROPOFF:
                seen_drop.add(c)
            elif c in drops_here and c not in seen_drop:
                raise Deadlock(f"pickup of {c} precedes its dropoff on the same route")

    ready: dict = {}
    for tour in tours:
        t, loc = 0.0, 0
        for c, kind in tour:
            t += d[loc][c]
            loc = c
            if kind is OpKind.DROPOFF:
                ready[c] = t + p[c]

    best = 0.0
    for tour in tours:
        if not tour:
            continue
        t, loc = 0.0, 0
        for c, kind in tour:
            t += d[loc][c]
            loc = c
            if kind is OpKind.PICKUP and ready[c] > t:
                t = ready[c]
        t += d[loc][0]
        if t > best:
            best = t
    return best
