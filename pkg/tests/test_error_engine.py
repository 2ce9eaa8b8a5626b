import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from certpred import error_engine as ee
from certpred.error_engine import DyadicBound, ExprNode, Input, analyze

from _support import error_bound_violations, uniform_instances

U53 = Fraction(1, 2**54)


def test_dyadic_bound_is_canonical_and_exact():
    assert DyadicBound(138, -51) == DyadicBound(69, -50)
    assert DyadicBound(0, 17) == DyadicBound(0)
    assert DyadicBound(3, -54) + DyadicBound(1, -54) == DyadicBound(1, -52)
    assert DyadicBound(3, -2) * DyadicBound(5, 1) == DyadicBound(15, -1)
    assert DyadicBound(129, -51).to_fraction() == Fraction(129, 2**51)
    with pytest.raises(ValueError):
        DyadicBound(-1)


def test_ceil_float_rounds_up():
    b = DyadicBound(2**60 + 1, -60)
    f = b.ceil_float()
    assert Fraction(f) >= b.to_fraction()
    assert f == 1.0 + 2.0**-52
    assert DyadicBound(129, -51).ceil_float() == 129 * 2.0**-51


def test_single_input():
    r = analyze(Input("x"), 53)
    assert r.mag_bound == DyadicBound(1)
    assert r.threshold == DyadicBound(1, -54)


def test_product_of_inputs():
    r = analyze(Input("y") * Input("z"), 53)
    assert (r.mag_bound, r.threshold) == (DyadicBound(1), DyadicBound(3, -54))


def test_two_by_two_minor():
    y2, z3, y3, z2 = (Input(n) for n in ("y2", "z3", "y3", "z2"))
    r = analyze(y2 * z3 - y3 * z2, 53)
    assert (r.mag_bound, r.threshold) == (DyadicBound(2), DyadicBound(1, -51))


def test_insphere_table_rows():
    rows = ee.filter_report(3, 53).rows
    assert len(rows) == 10
    assert [r.mag.to_fraction() for r in rows] == [1, 1, 2, 2, 4, 6, 3, 18, 36, 72]
    ref = ee.REFERENCE_INSPHERE3_53
    for i in (0, 1, 2, 6):  # X1, X2, X3, X7
        assert rows[i].err == ref[i][1]
    # literal application of the product rule at X4 and everything downstream
    in_u = [r.err.to_fraction() / U53 for r in rows]
    assert in_u == [1, 3, 8, 12, 28, 46, 14, 240, 516, 1104]
    assert [r.description for r in rows][3:] == ["X1 x X3", "X4 + X4", "X4 + X5", "X2 + X3", "X6 x X7", "X8 + X8", "X9 + X9"]


def test_insphere_root_is_138_units():
    r = ee.filter_report(3, 53)
    assert r.mag_bound == DyadicBound(72)
    assert r.threshold == DyadicBound(138, -51)
    assert any(n.startswith("X4:") for n in r.notes)


def test_reference_deviation_rows():
    dev = [label for label, *_ in ee.reference_deviations(ee.filter_report(3, 53))]
    assert dev == ["X4", "X5", "X6", "X8", "X9", "X10"]


def _propagate(mag_a, err_a, mag_b, err_b, op, u):
    if op == "*":
        return mag_a * mag_b, mag_a * err_b + mag_b * err_a + mag_a * mag_b * u
    return mag_a + mag_b, err_a + err_b + (mag_a + mag_b) * u


def test_dim2_insphere_by_hand():
    u = U53
    entry = (Fraction(1), u)
    sq = _propagate(*entry, *entry, "*", u)             # x*x and y*z products
    minor = _propagate(*sq, *sq, "+", u)                # 2x2 minor
    norm = _propagate(*sq, *sq, "+", u)                 # x*x + y*y
    term = _propagate(*minor, *norm, "*", u)
    pair = _propagate(*term, *term, "+", u)
    root = _propagate(*pair, *term, "+", u)
    r = ee.filter_report(2, 53)
    assert (r.mag_bound.to_fraction(), r.threshold.to_fraction()) == root
    assert r.threshold == DyadicBound(1, -47)


def test_dim1_insphere_by_hand():
    u = U53
    entry = (Fraction(1), u)
    sq = _propagate(*entry, *entry, "*", u)
    cube = _propagate(*entry, *sq, "*", u)
    root = _propagate(*cube, *cube, "+", u)
    r = ee.filter_report(1, 53)
    assert (r.mag_bound.to_fraction(), r.threshold.to_fraction()) == root == (2, Fraction(3, 2**52))
    assert len(r.rows) == 4


def test_orientation_dags():
    assert ee.analyze(ee.build_orientation_dag(1)).threshold == DyadicBound(1, -54)
    r2 = ee.analyze(ee.build_orientation_dag(2))
    assert (r2.mag_bound, r2.threshold) == (DyadicBound(2), DyadicBound(1, -51))
    r3 = ee.analyze(ee.build_orientation_dag(3))
    x6 = ee.filter_report(3, 53).rows[5]
    assert (r3.mag_bound, r3.threshold) == (x6.mag, x6.err)


@pytest.mark.parametrize("dim", range(1, 7))
def test_dags_cover_all_dimensions(dim):
    r = ee.filter_report(dim, 53)
    # dim+1 cofactors, each at most dim! in size, times a squared norm of at most dim
    assert r.mag_bound.to_fraction() == math.factorial(dim + 1) * dim
    assert ee.threshold(dim, 53) < ee.threshold(dim, 24)


def test_threshold_brackets_reference_value():
    ref53 = 129 * 2.0**-51
    ref24 = 129 * 2.0**-22
    assert ref53 <= ee.threshold(3, 53) <= 1.25 * ref53
    assert ref24 <= ee.threshold(3, 24) <= 1.25 * ref24
    assert ee.threshold(3, 24) == pytest.approx(3.3e-5, rel=0.01)
    assert ee.threshold(1, 53) == 3 * 2.0**-52


def test_threshold_rejects_other_precisions():
    with pytest.raises(ValueError):
        ee.threshold(3, 30)
    with pytest.raises(ValueError):
        ee.build_insphere_dag(7)


def test_cycle_is_structural_error():
    a = Input("a")
    b = a + a
    c = b * a
    object.__setattr__(b, "children", (c, a))
    with pytest.raises(ee.StructureError):
        analyze(c)


def test_shared_subexpressions_analyzed_once():
    root = ee.build_insphere_dag(3)
    r = analyze(root)
    seen = {}

    def walk(n):
        if id(n) in seen:
            return
        seen[id(n)] = n
        for c in n.children:
            walk(c)

    walk(root)
    assert r.node_count == len(seen)
    inputs = [n for n in seen.values() if n.kind == "input"]
    minors_2x2 = [n for n in seen.values() if n.kind == "sub" and all(
        c.kind == "mul" and all(g.kind == "input" for g in c.children) for c in n.children)]
    assert len(inputs) == 12
    # one per pair of rows among four
    assert len(minors_2x2) == 6


def _random_dag(draw_ops):
    nodes = [Input("a"), Input("b"), Input("c")]
    for op, i, j in draw_ops:
        a, b = nodes[i % len(nodes)], nodes[j % len(nodes)]
        nodes.append(ExprNode(op, (a, b)))
    return nodes[-1]


ops = st.lists(st.tuples(st.sampled_from(["add", "sub", "mul"]), st.integers(0, 50), st.integers(0, 50)), min_size=1, max_size=25)


@settings(max_examples=200, deadline=None)
@given(ops, st.sampled_from(["add", "sub", "mul"]))
def test_extra_operation_never_decreases_error(draw_ops, extra):
    root = _random_dag(draw_ops)
    before = analyze(root).threshold
    after = analyze(ExprNode(extra, (root, Input("d")))).threshold
    assert before <= after


@settings(max_examples=200, deadline=None)
@given(ops, st.integers(2, 52))
def test_fewer_mantissa_bits_never_decrease_errors(draw_ops, m):
    root = _random_dag(draw_ops)
    fine, coarse = analyze(root, m + 1), analyze(root, m)
    assert [r.err <= s.err for r, s in zip(fine.rows, coarse.rows)] == [True] * len(fine.rows)


def test_analysis_is_deterministic():
    a = ee.analyze(ee.build_insphere_dag(4), 53)
    b = ee.analyze(ee.build_insphere_dag(4), 53)
    assert a.threshold == b.threshold and [r.err for r in a.rows] == [r.err for r in b.rows]


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("precision", [53, 24])
def test_error_bound_soundness_low_dims(dim, precision):
    rng = np.random.default_rng(1000 + dim + precision)
    violations = 0
    for _ in range(10):
        violations += error_bound_violations(uniform_instances(dim, 100_000, rng), precision)
    assert violations == 0


@pytest.mark.parametrize("precision", [53, 24])
def test_error_bound_soundness_dim3_sample(precision):
    rng = np.random.default_rng(77 + precision)
    assert error_bound_violations(uniform_instances(3, 50_000, rng), precision) == 0


@pytest.mark.parametrize("dim", [4, 5])
def test_error_bound_soundness_higher_dims(dim):
    rng = np.random.default_rng(dim)
    assert error_bound_violations(uniform_instances(dim, 2_000, rng), 53) == 0


def test_report_serialization():
    d = ee.filter_report(3, 53).to_dict()
    assert d["threshold"] == "69*2^-50"
    assert len(d["rows"]) == 10
    assert d["rows"][2]["expression"] == "y3*z4 - y4*z3"
