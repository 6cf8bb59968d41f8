from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrp_rpd.instance import (FleetConfig, Instance, TsplibParseError,
                              VariantSpec, build_instance, dump_tsplib,
                              fleet_for, load_tsplib_file, parse_tsplib)

DATA = Path(__file__).resolve().parent.parent / "data"


def test_parse_gr17():
    raw = load_tsplib_file(DATA / "gr17.tsp")
    assert raw.dimension == 17
    assert raw.edge_weights[0][1] == 633
    assert np.allclose(raw.edge_weights, raw.edge_weights.T)
    assert np.all(np.diag(raw.edge_weights) == 0)


def test_parse_full_matrix_two_nodes():
    text = """NAME: two
TYPE: TSP
DIMENSION: 2
EDGE_WEIGHT_TYPE: EXPLICIT
EDGE_WEIGHT_FORMAT: FULL_MATRIX
EDGE_WEIGHT_SECTION
0 7
7 0
EOF
"""
    raw = parse_tsplib(text)
    assert raw.edge_weights[0][1] == 7
    assert raw.edge_weights[1][0] == 7


def test_parse_euc2d_pythagoras():
    text = """NAME: euc
DIMENSION: 2
EDGE_WEIGHT_TYPE: EUC_2D
NODE_COORD_SECTION
1 0 0
2 3 4
EOF
"""
    raw = parse_tsplib(text)
    assert raw.edge_weights[0][1] == 5


def test_parse_euc2d_nearest_integer_rounding():
    text = """NAME: euc
DIMENSION: 2
EDGE_WEIGHT_TYPE: EUC_2D
NODE_COORD_SECTION
1 0 0
2 1 1
EOF
"""
    # sqrt(2) = 1.414... rounds to 1
    assert parse_tsplib(text).edge_weights[0][1] == 1


def test_parse_ceil2d():
    text = """NAME: ceil
DIMENSION: 2
EDGE_WEIGHT_TYPE: CEIL_2D
NODE_COORD_SECTION
1 0 0
2 1 1
EOF
"""
    assert parse_tsplib(text).edge_weights[0][1] == 2


def test_parse_att():
    # ATT pseudo-Euclidean: r = sqrt(200/10) = 4.47 -> nint 4 < r -> 5
    text = """NAME: att
DIMENSION: 2
EDGE_WEIGHT_TYPE: ATT
NODE_COORD_SECTION
1 0 0
2 10 10
EOF
"""
    assert parse_tsplib(text).edge_weights[0][1] == 5


def test_parse_geo_regression():
    text = """NAME: geo
DIMENSION: 2
EDGE_WEIGHT_TYPE: GEO
NODE_COORD_SECTION
1 38.24 20.42
2 39.57 26.15
EOF
"""
    raw = parse_tsplib(text)
    # frozen output of the documented DDD.MM great-circle rule
    assert raw.edge_weights[0][1] == 492


def test_parse_upper_row():
    text = """NAME: up
DIMENSION: 3
EDGE_WEIGHT_TYPE: EXPLICIT
EDGE_WEIGHT_FORMAT: UPPER_ROW
EDGE_WEIGHT_SECTION
1 2
3
EOF
"""
    raw = parse_tsplib(text)
    assert raw.edge_weights[0][2] == 2
    assert raw.edge_weights[2][1] == 3


@pytest.mark.parametrize("mutation, message", [
    ("EDGE_WEIGHT_TYPE: EXPLICIT", "unsupported EDGE_WEIGHT_FORMAT"),
    ("EDGE_WEIGHT_TYPE: XRAY1", "unsupported EDGE_WEIGHT_TYPE"),
])
def test_parse_unsupported_type(mutation, message):
    text = f"""NAME: bad
DIMENSION: 2
{mutation}
EDGE_WEIGHT_SECTION
0 7 7 0
EOF
"""
    with pytest.raises(TsplibParseError, match=message):
        parse_tsplib(text)


def test_parse_dimension_mismatch():
    text = """NAME: bad
DIMENSION: 3
EDGE_WEIGHT_TYPE: EXPLICIT
EDGE_WEIGHT_FORMAT: FULL_MATRIX
EDGE_WEIGHT_SECTION
0 1 1 0
EOF
"""
    with pytest.raises(TsplibParseError, match="expects 9 entries"):
        parse_tsplib(text)


def test_parser_round_trip():
    raw = load_tsplib_file(DATA / "gr17.tsp")
    again = parse_tsplib(dump_tsplib(raw))
    assert np.array_equal(raw.edge_weights, again.edge_weights)
    assert again.dimension == raw.dimension


def test_fleet_rule():
    assert fleet_for(16) == FleetConfig(3, 5)
    assert fleet_for(23) == FleetConfig(3, 5)
    assert fleet_for(24) == FleetConfig(6, 4)
    assert fleet_for(1000) == FleetConfig(6, 4)
    with pytest.raises(ValueError):
        fleet_for(0)


class TestBuildInstance:
    raw = None

    @classmethod
    def setup_class(cls):
        cls.raw = load_tsplib_file(DATA / "gr17.tsp")

    def test_base_draws_in_range(self):
        inst = build_instance(self.raw, VariantSpec("base", 7))
        off = self.raw.edge_weights[~np.eye(17, dtype=bool)]
        assert inst.n == 16
        assert all(off.min() <= x <= off.max() for x in inst.p[1:])

    def test_variants_matched_to_base(self):
        base = build_instance(self.raw, VariantSpec("base", 7))
        for kind, factor in (("2x", 2.0), ("5x", 5.0)):
            var = build_instance(self.raw, VariantSpec(kind, 7))
            for c in base.customers:
                assert var.p[c] == factor * base.p[c]

    def test_random_multiplier_bounds(self):
        base = build_instance(self.raw, VariantSpec("base", 7))
        for kind, hi in (("1R10", 10), ("1R20", 20)):
            var = build_instance(self.raw, VariantSpec(kind, 7))
            for c in base.customers:
                ratio = var.p[c] / base.p[c]
                assert ratio == int(ratio) and 1 <= ratio <= hi

    def test_determinism_and_replicates(self):
        a = build_instance(self.raw, VariantSpec("1R10", 7, replicate=0))
        b = build_instance(self.raw, VariantSpec("1R10", 7, replicate=0))
        c = build_instance(self.raw, VariantSpec("1R10", 7, replicate=1))
        assert a.p == b.p
        assert a.p != c.p
        assert a.label != c.label

    def test_labels_record_seed(self):
        inst = build_instance(self.raw, VariantSpec("5x", 99))
        assert "5x" in inst.label and "99" in inst.label

    def test_fleet_assigned_by_customer_count(self):
        inst = build_instance(self.raw, VariantSpec("base", 7))
        assert inst.fleet == FleetConfig(3, 5)  # 16 customers

    def test_json_round_trip(self, tmp_path):
        inst = build_instance(self.raw, VariantSpec("1R20", 5, replicate=3))
        path = tmp_path / "inst.json"
        inst.save(path)
        again = Instance.load(path)
        assert again == inst

    def test_rejects_tiny_dimension(self):
        from vrp_rpd.instance import RawTsplib
        bad = RawTsplib("one", 1, np.zeros((1, 1)))
        with pytest.raises(ValueError):
            build_instance(bad, VariantSpec("base", 1))


def test_variant_spec_rejects_unknown_kind():
    with pytest.raises(ValueError):
        VariantSpec("3x", 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_base_variant_pure_function_of_seed(seed):
    raw = load_tsplib_file(DATA / "desk" / "rd10a.tsp")
    a = build_instance(raw, VariantSpec("base", seed))
    b = build_instance(raw, VariantSpec("base", seed))
    assert a.p == b.p
