import math

import numpy as np
import pytest

from tests.conftest import D, P, euclid_instance
from vrp_rpd import alns
from vrp_rpd.alns import (AlnsParams, OperatorBank, construct_initial,
                          cross_agent_relocation, destroy,
                          pickup_repositioning, removal_bounds, repair,
                          roulette_select, run_alns, run_pool, sa_accept,
                          shaw_relatedness, update_weights, worker_seed)
from vrp_rpd.insertion import RepairFailed
from vrp_rpd.schedule import (Schedule, Solution, evaluate, exact_makespan,
                              two_pass_estimate, validate_solution)


def test_removal_bounds_reference_points():
    assert removal_bounds(80) == (4, 4)
    assert removal_bounds(202) == (5, 10)
    assert removal_bounds(431) == (10, 21)
    assert removal_bounds(1) == (4, 4)


def test_update_weights_reference_points():
    bank = OperatorBank.fresh()
    bank.weights["random"], bank.scores["random"], bank.attempts["random"] = 1.0, 33.0, 1
    bank.weights["worst"], bank.scores["worst"], bank.attempts["worst"] = 0.1, 0.0, 5
    bank.weights["shaw"], bank.attempts["shaw"] = 2.0, 0
    update_weights(bank, r=0.1)
    assert bank.weights["random"] == pytest.approx(4.2)
    assert bank.weights["worst"] == pytest.approx(0.1)
    assert bank.weights["shaw"] == pytest.approx(1.8)
    assert all(v == 0 for v in bank.scores.values())
    assert all(v == 0 for v in bank.attempts.values())


def test_weights_never_drop_below_floor():
    bank = OperatorBank.fresh()
    for _ in range(50):
        for name in bank.weights:
            bank.attempts[name] = 3  # zero scores
        update_weights(bank, r=0.5)
    assert all(w >= 0.1 for w in bank.weights.values())


class _FixedRng:
    def __init__(self, value):
        self.value = value

    def random(self):
        return self.value


def test_sa_accept_rules():
    assert sa_accept(90, 100, 10.0, _FixedRng(0.999))
    # z' = z + T accepted iff the uniform draw is below e^-1
    assert sa_accept(110, 100, 10.0, _FixedRng(math.exp(-1) - 1e-6))
    assert not sa_accept(110, 100, 10.0, _FixedRng(math.exp(-1) + 1e-6))
    # vanishing temperature rejects any worsening almost surely
    assert not sa_accept(101, 100, 1e-12, _FixedRng(0.01))
    with pytest.raises(ValueError):
        sa_accept(1, 2, 0.0, _FixedRng(0.5))


def test_roulette_proportionality_chi_square():
    rng = np.random.default_rng(123)
    names = ("a", "b", "c", "d")
    weights = {"a": 1.0, "b": 2.0, "c": 3.0, "d": 4.0}
    draws = 100_000
    counts = {n: 0 for n in names}
    for _ in range(draws):
        counts[roulette_select(names, weights, rng)] += 1
    total_w = sum(weights.values())
    chi2 = sum((counts[n] - draws * weights[n] / total_w) ** 2
               / (draws * weights[n] / total_w) for n in names)
    # chi-square critical value, 3 dof, alpha = 0.001
    assert chi2 < 16.266


def test_shaw_relatedness_reference_value():
    from vrp_rpd.instance import FleetConfig, Instance
    inst = Instance(n=2, d=((0, 4, 6), (4, 0, 10), (6, 10, 0)),
                    p=(0, 1, 1), fleet=FleetConfig(2, 2), label="shaw")
    sched = Schedule(
        t_drop={1: 100.0, 2: 104.0}, t_pickup={},
        drop_vehicle={1: 0, 2: 0}, pickup_vehicle={1: 0, 2: 1},
        returns=[0.0, 0.0], makespan=0.0, events=[[], []], initial_loads=[2, 2],
    )
    # d(1,2)=10, |dT_drop|=4, same dropoff vehicle, different pickup vehicles:
    # 9*10 + 3*4 + 0 + 5/2 = 104.5
    assert shaw_relatedness(inst, sched, 1, 2) == pytest.approx(104.5)


@pytest.mark.parametrize("operator", alns.DESTROY_OPERATORS)
def test_destroy_removes_what_it_reports(operator):
    inst = euclid_instance(10, seed=4)
    sol = construct_initial(inst, seed=1)
    rng = np.random.default_rng(9)
    partial, removed = destroy(inst, sol, operator, q=4, rng=rng)
    assert len(removed) >= min(4, inst.n)
    left = {c for tour in partial.tours for c, _ in tour}
    assert left.isdisjoint(removed)
    assert left | set(removed) == set(inst.customers)


def test_destroy_everything_and_repair_rebuilds(toy):
    sol = Solution.from_lists([[(1, D), (2, D), (1, P), (2, P)]])
    rng = np.random.default_rng(1)
    partial, removed = destroy(toy, sol, "random", q=2, rng=rng)
    assert removed == [1, 2]
    assert all(not tour for tour in partial.tours)
    rebuilt = repair(toy, partial, removed, "greedy", rng)
    validate_solution(toy, rebuilt)
    # single-route optimum for the toy is 47, via the full interleaving
    assert evaluate(toy, rebuilt).makespan == 47


def test_critical_path_targets_bottleneck():
    inst = euclid_instance(12, seed=6)
    sol = construct_initial(inst, seed=2)
    sched = evaluate(inst, sol)
    hot = sched.bottleneck()
    on_route = {c for c, _ in sol.tours[hot]}
    rng = np.random.default_rng(3)
    _, removed = destroy(inst, sol, "critical_path", q=min(4, len(on_route)), rng=rng)
    assert set(removed) <= on_route or len(on_route) < 4


def test_repair_zero_removed_is_identity(toy):
    sol = Solution.from_lists([[(1, D), (2, D), (1, P), (2, P)]])
    assert repair(toy, sol, [], "regret2", np.random.default_rng(0)) is sol


@pytest.mark.parametrize("operator", alns.REPAIR_OPERATORS)
def test_repair_restores_coverage(operator):
    inst = euclid_instance(9, seed=8)
    sol = construct_initial(inst, seed=3)
    rng = np.random.default_rng(11)
    partial, removed = destroy(inst, sol, "random", q=4, rng=rng)
    rebuilt = repair(inst, partial, removed, operator, rng)
    validate_solution(inst, rebuilt)
    evaluate(inst, rebuilt)


def test_construct_initial_feasible_and_beats_serial():
    for seed in (1, 5, 9):
        inst = euclid_instance(10, seed=seed)
        sol = construct_initial(inst, seed=seed)
        z = evaluate(inst, sol).makespan
        serial = sum(2 * inst.d[0][c] + inst.p[c] for c in inst.customers)
        assert z < serial


def test_construct_initial_single_vehicle():
    inst = euclid_instance(6, seed=2, fleet=(1, 3))
    sol = construct_initial(inst, seed=0)
    evaluate(inst, sol)


def test_sweep_order_is_deterministic_permutation():
    inst = euclid_instance(9, seed=14)
    order = alns.sweep_order(inst)
    assert sorted(order) == list(inst.customers)
    assert order == alns.sweep_order(inst)


def test_pickup_repositioning_improvement_only():
    inst = euclid_instance(10, seed=5)
    sol = construct_initial(inst, seed=1)
    z0 = evaluate(inst, sol).makespan
    out = pickup_repositioning(inst, sol)
    z1 = evaluate(inst, out).makespan
    assert z1 <= z0
    # applying again at the fixed point changes nothing
    assert pickup_repositioning(inst, out) == pickup_repositioning(inst, out)


def test_pickup_repositioning_moves_off_bottleneck():
    # everything on vehicle 0 with long processing: handing a pickup to the
    # idle vehicle lets the waits overlap
    inst = euclid_instance(2, seed=3, fleet=(2, 2), p_range=(200, 260))
    lopsided = Solution.from_lists([
        [(c, D) for c in inst.customers] + [(c, P) for c in inst.customers],
        [],
    ])
    z0 = evaluate(inst, lopsided).makespan
    out = pickup_repositioning(inst, lopsided)
    assert evaluate(inst, out).makespan < z0


def test_cross_agent_relocation_identity_for_single_vehicle():
    inst = euclid_instance(5, seed=4, fleet=(1, 5))
    sol = construct_initial(inst, seed=0)
    assert cross_agent_relocation(inst, sol) == sol


def test_cross_agent_relocation_migrates_from_loaded_vehicle():
    inst = euclid_instance(4, seed=7, fleet=(2, 5))
    lopsided = Solution.from_lists([
        [(c, D) for c in inst.customers] + [(c, P) for c in inst.customers],
        [],
    ])
    z0 = evaluate(inst, lopsided).makespan
    out = cross_agent_relocation(inst, lopsided)
    z1 = evaluate(inst, out).makespan
    assert z1 < z0
    assert any(len(t) for t in out.tours[1:])


def test_run_alns_zero_iterations_returns_initial():
    inst = euclid_instance(8, seed=3)
    params = AlnsParams(max_iter=0)
    best, stats = run_alns(inst, params, seed=5)
    assert best == construct_initial(inst, seed=5)
    assert stats.iterations == 0


def test_run_alns_traces_and_temperature():
    inst = euclid_instance(8, seed=3)
    params = AlnsParams(max_iter=300, weight_interval=100)
    best, stats = run_alns(inst, params, seed=5)
    z_init = stats.initial_makespan
    # best trace is non-increasing and starts at the initial makespan
    assert stats.best_trace[0] == (0, z_init)
    values = [z for _, z in stats.best_trace]
    assert all(a >= b for a, b in zip(values, values[1:]))
    # geometric cooling from 0.30 * z_init
    expected_t = 0.30 * z_init * params.alpha ** 100
    assert stats.weight_rows[0]["temperature"] == pytest.approx(expected_t)
    assert all(row[f"w_{name}"] >= params.min_weight - 1e-12
               for row in stats.weight_rows for name in OperatorBank.fresh().weights)
    assert evaluate(inst, best).makespan <= z_init


def test_run_alns_deterministic():
    inst = euclid_instance(7, seed=9)
    params = AlnsParams(max_iter=200)
    a, _ = run_alns(inst, params, seed=77)
    b, _ = run_alns(inst, params, seed=77)
    assert a == b


def test_run_pool_single_worker_matches_run_alns():
    inst = euclid_instance(7, seed=10)
    params = AlnsParams(max_iter=150)
    pooled, info = run_pool(inst, params, pool_size=1, seed=13)
    direct, _ = run_alns(inst, params, seed=worker_seed(13, 0))
    assert pooled == direct
    assert info["workers"] == 1


def test_run_pool_returns_best_of_workers():
    inst = euclid_instance(7, seed=10)
    params = AlnsParams(max_iter=120, best_check_interval=50)
    best, info = run_pool(inst, params, pool_size=3, seed=13)
    z = evaluate(inst, best).makespan
    for stats in info["worker_stats"]:
        assert z <= stats.best_trace[-1][1] + 1e-9
