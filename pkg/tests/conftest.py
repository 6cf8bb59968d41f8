import numpy as np
import pytest

from vrp_rpd.instance import FleetConfig, Instance
from vrp_rpd.schedule import OpKind, Solution

D = OpKind.DROPOFF
P = OpKind.PICKUP


def euclid_instance(n, seed, span=100, p_range=(20, 120), fleet=(3, 5), label=None):
    """Random rounded-Euclidean instance for tests."""
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, span, size=(n + 1, 2))
    d = tuple(
        tuple(float(round(np.hypot(*(pts[i] - pts[j])))) for j in range(n + 1))
        for i in range(n + 1)
    )
    p = (0.0,) + tuple(float(x) for x in rng.integers(*p_range, n))
    return Instance(n=n, d=d, p=p, fleet=FleetConfig(*fleet),
                    label=label or f"rnd{n}-{seed}")


def random_solution(instance, rng):
    """Uniformly random structurally-valid solution (may be infeasible)."""
    ops = [(c, D) for c in instance.customers] + [(c, P) for c in instance.customers]
    tours = [[] for _ in range(instance.m)]
    for idx in rng.permutation(len(ops)):
        tours[int(rng.integers(instance.m))].append(ops[int(idx)])
    return Solution.from_lists(tours)


@pytest.fixture
def toy():
    """Two customers, one vehicle of capacity 2: optimum 47 via D1,D2,P1,P2."""
    return Instance(n=2, d=((0, 10, 12), (10, 0, 5), (12, 5, 0)),
                    p=(0, 20, 20), fleet=FleetConfig(1, 2), label="toy")


@pytest.fixture
def cross_toy():
    """One customer, two vehicles of capacity 1: dropper and collector."""
    return Instance(n=1, d=((0, 10), (10, 0)), p=(0, 20),
                    fleet=FleetConfig(2, 1), label="cross-toy")


@pytest.fixture
def single_toy():
    """One customer, one vehicle: makespan d + p + d = 40."""
    return Instance(n=1, d=((0, 10), (10, 0)), p=(0, 20),
                    fleet=FleetConfig(1, 1), label="single-toy")
