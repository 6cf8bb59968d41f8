import itertools

import numpy as np
import pytest

from tests.conftest import D, P, euclid_instance
from vrp_rpd.instance import FleetConfig, Instance
from vrp_rpd.oracle import (InstanceTooLarge, OracleLimits, default_big_m,
                            exact_solve, export_milp)
from vrp_rpd.schedule import ScheduleError, Solution, evaluate


def brute_force_optimum(instance):
    """Full enumeration over operation interleavings and vehicle
    assignments, scored by the exact evaluator; independent of the
    branch-and-bound search path."""
    ops = ([(c, D) for c in instance.customers]
           + [(c, P) for c in instance.customers])
    best = float("inf")
    for perm in itertools.permutations(range(len(ops))):
        for assign in itertools.product(range(instance.m), repeat=len(ops)):
            tours = [[] for _ in range(instance.m)]
            for idx in perm:
                tours[assign[idx]].append(ops[idx])
            try:
                z = evaluate(instance, Solution.from_lists(tours)).makespan
            except ScheduleError:
                continue
            if z < best:
                best = z
    return best


def test_single_customer_optimum(single_toy):
    result = exact_solve(single_toy)
    assert result.makespan == 40
    assert result.optimal
    assert evaluate(single_toy, result.solution).makespan == 40


def test_toy_single_vehicle_optimum(toy):
    result = exact_solve(toy)
    assert result.makespan == 47
    assert result.solution.tours[0] == ((1, D), (2, D), (1, P), (2, P))


def test_toy_two_vehicles_unit_capacity():
    inst = Instance(n=2, d=((0, 10, 12), (10, 0, 5), (12, 5, 0)),
                    p=(0, 20, 20), fleet=FleetConfig(2, 1), label="toy21")
    result = exact_solve(inst)
    assert result.makespan <= 47
    # frozen regression constant, established by full enumeration
    assert result.makespan == 44


@pytest.mark.parametrize("seed", [0, 1])
@pytest.mark.parametrize("m,k", [(1, 2), (2, 1), (2, 2)])
def test_oracle_matches_brute_force(seed, m, k):
    inst = euclid_instance(2, seed=seed, span=40, p_range=(5, 60), fleet=(m, k))
    result = exact_solve(inst)
    assert result.optimal
    assert result.makespan == brute_force_optimum(inst)
    assert evaluate(inst, result.solution).makespan == result.makespan


def test_oracle_matches_brute_force_three_customers():
    inst = euclid_instance(3, seed=5, span=40, p_range=(5, 60), fleet=(2, 2))
    result = exact_solve(inst)
    assert result.optimal
    assert result.makespan == brute_force_optimum(inst)


def test_oracle_lower_bounds_search_methods():
    from vrp_rpd.alns import AlnsParams, run_alns
    from vrp_rpd.baselines import best_heuristic
    inst = euclid_instance(4, seed=9, fleet=(2, 2))
    opt = exact_solve(inst).makespan
    assert evaluate(inst, best_heuristic(inst)).makespan >= opt - 1e-9
    alns_best, _ = run_alns(inst, AlnsParams(max_iter=500), seed=1)
    assert evaluate(inst, alns_best).makespan >= opt - 1e-9


def test_instance_too_large():
    inst = euclid_instance(7, seed=1)
    with pytest.raises(InstanceTooLarge):
        exact_solve(inst, OracleLimits(max_customers=6))


def test_budget_exhaustion_flags_result():
    inst = euclid_instance(5, seed=3, fleet=(2, 2))
    result = exact_solve(inst, OracleLimits(max_nodes=5))
    assert not result.optimal
    evaluate(inst, result.solution)  # best-found is still feasible


def test_limits_reject_hopeless_sizes():
    with pytest.raises(ValueError):
        OracleLimits(max_customers=9)


# ---------------------------------------------------------------------------
# LP export
# ---------------------------------------------------------------------------


def _family_counts(n: int, m: int) -> dict:
    """Closed-form constraint-family row counts from the index ranges."""
    return {
        "svc_d_": n, "svc_p_": n,
        "depot_out_": m, "depot_in_": m,
        "t0_": m, "tdep0_": m,
        "flow_in_": n * m, "flow_out_": n * m,
        "noself_": (n + 1) * m,
        "visit_d_": n * m, "visit_p_": n * m,
        "dropt_lo_": n * m, "dropt_hi_": n * m,
        "pickt_lo_": n * m, "pickt_hi_": n * m,
        "prec_": n,
        "depge_": n * m, "wait_": n * m,
        "prop_": n * n * m,
        "q0_": m,
        "cap_lo_": n * n * m, "cap_hi_": n * n * m,
        "res_": n * n * m, "pcap_": n * n * m,
        "mtz_": n * (n - 1) * m,
        "ret_": n * m,
        "mk_": m,
    }


def _constraint_names(text: str) -> list:
    names = []
    in_rows = False
    for line in text.splitlines():
        if line.startswith("Subject To"):
            in_rows = True
            continue
        if line.startswith("Bounds"):
            break
        if in_rows and ":" in line:
            names.append(line.strip().split(":", 1)[0])
    return names


@pytest.mark.parametrize("n,m", [(1, 1), (2, 2)])
def test_export_constraint_family_counts(n, m):
    d = tuple(tuple(10.0 * abs(i - j) for j in range(n + 1)) for i in range(n + 1))
    inst = Instance(n=n, d=d, p=(0.0,) + (20.0,) * n,
                    fleet=FleetConfig(m, 2), label=f"lp{n}{m}")
    text = export_milp(inst)
    names = _constraint_names(text)
    expected = _family_counts(n, m)
    for prefix, count in expected.items():
        got = sum(1 for name in names if name.startswith(prefix))
        assert got == count, f"{prefix}: {got} != {count}"
    assert len(names) == sum(expected.values())


def test_export_anchor_rows(single_toy):
    text = export_milp(single_toy)
    assert "Minimize" in text and text.index("Minimize") < text.index("Subject To")
    assert " obj: T" in text
    # processing must finish before the pickup, independent of vehicles
    assert "prec_1: Tpick_1 - Tdrop_1 >= 20" in text
    # vehicles leave the depot fully loaded in the exported formulation
    assert "q0_1: q_0_1 = 1" in text
    assert text.rstrip().endswith("End")


def test_export_structure_and_big_m():
    inst = euclid_instance(2, seed=4, fleet=(2, 2))
    m_default = default_big_m(inst)
    assert m_default >= max(inst.p)
    text = export_milp(inst, big_m=m_default)
    for section in ("Minimize", "Subject To", "Bounds", "Binaries", "Generals", "End"):
        assert section in text
    # every binary/general name also appears in some constraint row
    assert "x_0_1_1" in text and "u_1_1" in text and "pi_1_2" in text
