"""Biased random-key genetic algorithm with a multi-pass greedy decoder.

Chromosomes hold 4n genes in [0,1): 2n operation priorities followed by 2n
vehicle-assignment hints, laid out (D_1, P_1, ..., D_n, P_n) in each half.
The decoder schedules operations in ascending priority order over repeated
passes, deferring operations whose preconditions fail (pickup before its
dropoff, or no vehicle with capacity), and assigns each operation to the
feasible vehicle with the earliest completion time, breaking near-ties with
the hint gene.  Chromosomes that cannot schedule everything are penalized
rather than rejected.

Warm starts seed part of the initial population with the encoded incumbent
of a preceding search stage plus three quick construction solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schedule import OpKind, Solution

_D = OpKind.DROPOFF
_P = OpKind.PICKUP

_GENE_MAX = np.nextafter(1.0, 0.0)  # largest float below 1.0
_TIE = 1e-9

WARM_SEED_COUNT = 20


class PopulationTooSmall(Exception):
    """Elite or non-elite pool would be empty at this population size."""


@dataclass
class BrkgaParams:
    population: int = 30000
    elite_fraction: float = 0.15
    mutant_fraction: float = 0.15
    elite_bias: float = 0.7
    generations: int = 20000
    warm_start_fraction: float = 0.15
    infeasibility_penalty: float = 1e6
    wait_relaxation: bool = True

    def __post_init__(self):
        if self.elite_fraction + self.mutant_fraction >= 1.0:
            raise ValueError("elite and mutant fractions must sum below 1")
        if not 0.5 < self.elite_bias <= 1.0:
            raise ValueError("elite bias must lie in (0.5, 1]")


@dataclass
class DecodedResult:
    solution: Solution
    fitness: float
    scheduled_count: int
    makespan: float
    op_visits: int


@dataclass
class BrkgaStats:
    generations: int = 0
    decodes: int = 0
    best_fitness: float = math.inf
    trace: list = field(default_factory=list)  # (generation, best fitness)


def op_index(customer: int, kind: OpKind) -> int:
    base = 2 * (customer - 1)
    return base if kind is _D else base + 1


def random_population(n: int, size: int, rng) -> np.ndarray:
    return rng.random((size, 4 * n))


def _hint_vehicle(m: int, gene: float) -> int:
    """floor(m * gene) with protection against values sitting a float ulp
    below the next bucket boundary (gene = v/m must recover v)."""
    x = m * gene
    h = int(x)
    if x - h > 1.0 - 1e-9:
        h += 1
    return h if h < m else m - 1


def decode(chromosome, instance, params: BrkgaParams) -> DecodedResult:
    """Multi-pass decoding of one chromosome into a solution and fitness.

    Operations are visited in ascending priority over repeated passes.  Each
    operation goes to its hinted vehicle; the hint is overridden only when
    that vehicle cannot take the operation, falling back to the feasible
    vehicle with the earliest completion time.  Capacity feasibility uses
    the same adaptive initial-load interval as the evaluator, so any
    evaluator-feasible encoded solution replays exactly.

    With wait relaxation on (default), a pickup is feasible as soon as its
    dropoff is scheduled and a vehicle has room: the vehicle drives over and
    waits on-site, completing at max(arrival, ready).  The strict mode
    additionally requires a vehicle clock to have passed the ready time,
    which cannot wait and generally leaves operations unscheduled (penalized
    in the fitness); it exists for fidelity experiments.
    """
    n, m, k = instance.n, instance.m, instance.k
    d, p = instance.d, instance.p
    two_n = 2 * n
    pi = chromosome[:two_n]
    alpha = chromosome[two_n:]
    relax = params.wait_relaxation

    pending = [int(o) for o in np.argsort(pi, kind="stable")]
    t = [0.0] * m
    loc = [0] * m
    # per-vehicle net prefix sum and feasible initial-load interval
    net = [0] * m
    lo = [0] * m
    hi = [k] * m
    t_drop = [0.0] * (n + 1)
    dropped = [False] * (n + 1)
    tours = [[] for _ in range(m)]
    visits = 0

    def can_drop(v):
        need = 1 - net[v]
        return (need if need > lo[v] else lo[v]) <= hi[v]

    def can_pick(v):
        room = k - 1 - net[v]
        return lo[v] <= (room if room < hi[v] else hi[v])

    for _pass in range(two_n):
        if not pending:
            break
        deferred = []
        progressed = False
        for op in pending:
            visits += 1
            c = (op >> 1) + 1
            is_pick = op & 1
            if is_pick and not dropped[c]:
                deferred.append(op)
                continue
            ready = t_drop[c] + p[c] if is_pick else 0.0
            feas = []
            for v in range(m):
                if is_pick:
                    if not can_pick(v):
                        continue
                    if relax:
                        arr = t[v] + d[loc[v]][c]
                        feas.append((arr if arr >= ready else ready, v))
                    elif t[v] >= ready:
                        feas.append((t[v] + d[loc[v]][c], v))
                elif can_drop(v):
                    feas.append((t[v] + d[loc[v]][c], v))
            if not feas:
                deferred.append(op)
                continue
            hint = _hint_vehicle(m, alpha[op])
            pick_v, pick_comp = -1, 0.0
            for comp, v in feas:
                if v == hint:
                    pick_v, pick_comp = v, comp
                    break
            if pick_v < 0:
                pick_key = None
                for comp, v in feas:
                    key = (comp, abs(v - hint), v)
                    if pick_key is None or key < pick_key:
                        pick_key, pick_v, pick_comp = key, v, comp
            v = pick_v
            t[v] = pick_comp
            loc[v] = c
            if is_pick:
                room = k - 1 - net[v]
                if room < hi[v]:
                    hi[v] = room
                net[v] += 1
                tours[v].append((c, _P))
            else:
                need = 1 - net[v]
                if need > lo[v]:
                    lo[v] = need
                net[v] -= 1
                dropped[c] = True
                t_drop[c] = pick_comp
                tours[v].append((c, _D))
            progressed = True
        pending = deferred
        if not progressed:
            break

    z = max(t[v] + d[loc[v]][0] for v in range(m))
    unscheduled = len(pending)
    fitness = z + params.infeasibility_penalty * unscheduled
    return DecodedResult(
        solution=Solution.from_lists(tours),
        fitness=fitness,
        scheduled_count=two_n - unscheduled,
        makespan=z,
        op_visits=visits,
    )


def encode(instance, solution: Solution) -> np.ndarray:
    """Chromosome reproducing a solution's route order and assignments:
    priority (r-1)/L_v for the op at 1-based position r of an L_v-long
    route, hint v/m for vehicle v.  All genes lie in [0, 1)."""
    n, m = instance.n, instance.m
    genes = np.zeros(4 * n)
    for v, tour in enumerate(solution.tours):
        L = len(tour)
        for r, (c, kind) in enumerate(tour):
            o = op_index(c, kind)
            genes[o] = r / L
            genes[2 * n + o] = v / m
    return genes


def perturb(chromosome, rng) -> np.ndarray:
    """Uniform noise in [-0.03, 0.03] per gene, clamped back into [0, 1)."""
    noise = rng.uniform(-0.03, 0.03, size=len(chromosome))
    return np.clip(chromosome + noise, 0.0, _GENE_MAX)


def evolve(population: np.ndarray, fitnesses, params: BrkgaParams, rng) -> np.ndarray:
    """One generation: elites copied verbatim, fresh random mutants, and
    biased uniform crossover of one elite with one non-elite parent.
    Counts use floor rounding with the remainder going to offspring; the
    returned population keeps the elites in its first rows."""
    size, genes = population.shape
    n_elite = int(params.elite_fraction * size)
    n_mutant = int(params.mutant_fraction * size)
    n_offspring = size - n_elite - n_mutant
    if n_elite < 1 or size - n_elite < 1:
        raise PopulationTooSmall(f"population {size} cannot sustain elites")

    order = np.argsort(fitnesses, kind="stable")
    elites = population[order[:n_elite]]
    others = population[order[n_elite:]]

    mutants = rng.random((n_mutant, genes))
    e_idx = rng.integers(n_elite, size=n_offspring)
    o_idx = rng.integers(len(others), size=n_offspring)
    mask = rng.random((n_offspring, genes)) < params.elite_bias
    offspring = np.where(mask, elites[e_idx], others[o_idx])
    return np.concatenate([elites, mutants, offspring], axis=0)


# ---------------------------------------------------------------------------
# Warm-start construction
# ---------------------------------------------------------------------------


def _greedy_ops_solution(instance) -> Solution:
    """Assign each next operation to the nearest available vehicle: repeat
    taking the feasible (operation, vehicle) pair with earliest completion."""
    n, m, k = instance.n, instance.m, instance.k
    d, p = instance.d, instance.p
    t = [0.0] * m
    q = [k] * m
    loc = [0] * m
    tours = [[] for _ in range(m)]
    undropped = set(instance.customers)
    unpicked: dict = {}
    while undropped or unpicked:
        best = None
        for v in range(m):
            if q[v] > 0:
                for c in undropped:
                    key = (t[v] + d[loc[v]][c], 0, c, v)
                    if best is None or key < best:
                        best = key
            if q[v] < k:
                for c, ready in unpicked.items():
                    arr = t[v] + d[loc[v]][c]
                    key = (arr if arr >= ready else ready, 1, c, v)
                    if best is None or key < best:
                        best = key
        comp, is_pick, c, v = best
        t[v] = comp
        loc[v] = c
        if is_pick:
            q[v] += 1
            unpicked.pop(c)
            tours[v].append((c, _P))
        else:
            q[v] -= 1
            undropped.discard(c)
            unpicked[c] = comp + p[c]
            tours[v].append((c, _D))
    return Solution.from_lists(tours)


def _load_balanced_solution(instance) -> Solution:
    """Distribute customers over vehicles by estimated workload
    2 d(0,c) + p_c (heaviest first onto the lightest vehicle), then route
    each vehicle greedily over its own set."""
    w = {c: 2.0 * instance.d[0][c] + instance.p[c] for c in instance.customers}
    load = [0.0] * instance.m
    groups = [[] for _ in range(instance.m)]
    for c in sorted(instance.customers, key=lambda c: (-w[c], c)):
        v = min(range(instance.m), key=lambda i: (load[i], i))
        groups[v].append(c)
        load[v] += w[c]
    return Solution.from_lists([_route_group(instance, g) for g in groups])


def _route_group(instance, customers) -> list:
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
                key = ((arr if arr >= ready else ready) - t, 1, c)
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


def _spt_solution(instance) -> Solution:
    """Dropoffs in ascending processing-time order (each to the earliest
    completing vehicle); when every vehicle is empty-handed the cheapest
    ready pickup is taken instead, and remaining pickups finish the tours."""
    n, m, k = instance.n, instance.m, instance.k
    d, p = instance.d, instance.p
    t = [0.0] * m
    q = [k] * m
    loc = [0] * m
    tours = [[] for _ in range(m)]
    drop_order = sorted(instance.customers, key=lambda c: (p[c], c))
    unpicked: dict = {}

    def do_pick():
        best = None
        for v in range(m):
            if q[v] >= k:
                continue
            for c, ready in unpicked.items():
                arr = t[v] + d[loc[v]][c]
                key = (arr if arr >= ready else ready, c, v)
                if best is None or key < best:
                    best = key
        comp, c, v = best
        t[v] = comp
        loc[v] = c
        q[v] += 1
        unpicked.pop(c)
        tours[v].append((c, _P))

    for c in drop_order:
        while not any(q[v] > 0 for v in range(m)):
            do_pick()
        v = min(range(m), key=lambda v: (t[v] + d[loc[v]][c], v))
        t[v] += d[loc[v]][c]
        loc[v] = c
        q[v] -= 1
        unpicked[c] = t[v] + p[c]
        tours[v].append((c, _D))
    while unpicked:
        do_pick()
    return Solution.from_lists(tours)


def warm_start_seeds(instance, incumbent: Solution) -> list:
    """The encoded incumbent (always first, verbatim) plus the three
    construction solutions, also encoded."""
    return [
        encode(instance, incumbent),
        encode(instance, _greedy_ops_solution(instance)),
        encode(instance, _load_balanced_solution(instance)),
        encode(instance, _spt_solution(instance)),
    ]


def warm_start_population(instance, alns_solution: Solution,
                          params: BrkgaParams, rng) -> np.ndarray:
    """Initial population with ceil(warm_start_fraction * N_p) warm slots.

    Twenty seed chromosomes are built from the incumbent and construction
    encodings (the incumbent verbatim, the rest perturbed copies of it);
    warm slots cycle through the seeds, re-perturbing on reuse, and the
    remaining slots are uniform random."""
    n_p = params.population
    seeds = warm_start_seeds(instance, alns_solution)
    while len(seeds) < WARM_SEED_COUNT:
        seeds.append(perturb(seeds[0], rng))
    n_warm = min(n_p, math.ceil(params.warm_start_fraction * n_p))
    pop = rng.random((n_p, 4 * instance.n))
    for slot in range(n_warm):
        if slot < len(seeds):
            pop[slot] = seeds[slot]
        else:
            pop[slot] = perturb(seeds[slot % len(seeds)], rng)
    return pop


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------


def run_brkga(instance, params: BrkgaParams, warm_population=None, seed: int = 0):
    """Evolve for the configured number of generations, decoding every new
    chromosome; returns (best_solution, BrkgaStats).  Elitism makes the
    per-generation best fitness non-increasing."""
    rng = np.random.Generator(np.random.PCG64(seed))
    if warm_population is not None:
        population = np.array(warm_population, dtype=float, copy=True)
    else:
        population = random_population(instance.n, params.population, rng)
    size = population.shape[0]

    stats = BrkgaStats()
    fits = np.empty(size)
    best: DecodedResult | None = None
    for i in range(size):
        res = decode(population[i], instance, params)
        stats.decodes += 1
        fits[i] = res.fitness
        if best is None or res.fitness < best.fitness:
            best = res
    stats.trace.append((0, best.fitness))

    n_elite = int(params.elite_fraction * size)
    for gen in range(1, params.generations + 1):
        order = np.argsort(fits, kind="stable")
        elite_fits = fits[order[:n_elite]]
        population = evolve(population, fits, params, rng)
        fits = np.empty(size)
        fits[:n_elite] = elite_fits
        for i in range(n_elite, size):
            res = decode(population[i], instance, params)
            stats.decodes += 1
            fits[i] = res.fitness
            if res.fitness < best.fitness:
                best = res
        stats.trace.append((gen, best.fitness))

    stats.generations = params.generations
    stats.best_fitness = best.fitness
    return best.solution, stats
