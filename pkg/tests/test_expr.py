import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conglab.expr import (
    EvalError,
    Grid,
    ParseError,
    UnknownIdentifierError,
    differentiate,
    evaluate,
    node_count,
    parse,
    to_string,
)

C2 = ("R1", "R2")


def test_precedence_and_power_associativity():
    assert evaluate(parse("2^3^2", C2), (0, 0)) == 2.0**9
    assert evaluate(parse("-2^2", C2), (0, 0)) == -4.0
    assert evaluate(parse("1 + 2*3 - 4/2", C2), (0, 0)) == 5.0


def test_functions_and_coordinates():
    e = parse("sin(R1)*exp(R2) + sqrt(R2) - log(R1)", C2)
    x, y = 0.7, 1.9
    assert evaluate(e, (x, y)) == pytest.approx(math.sin(x) * math.exp(y) + math.sqrt(y) - math.log(x))


def test_unknown_identifier_reports_offset():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("R1 + R3", C2)
    assert info.value.offset == 5
    assert info.value.identifier == "R3"


@pytest.mark.parametrize("source", ["R1 +", "(R1", "R1 R2", "", "*R1", "sin R1"])
def test_malformed_input_raises(source):
    with pytest.raises(ParseError):
        parse(source, C2)


def test_division_by_zero_is_reported():
    with pytest.raises(EvalError) as info:
        evaluate(parse("1/(R1-R2)", C2), (1.0, 1.0))
    assert info.value.kind == "division by zero"


def test_domain_error_is_reported():
    with pytest.raises(EvalError) as info:
        evaluate(parse("log(R1)", C2), (-1.0, 0.0))
    assert info.value.kind == "domain"


def test_vectorised_evaluation_broadcasts():
    e = parse("R1*R2", C2)
    out = evaluate(e, (np.array([1.0, 2.0]), 3.0))
    np.testing.assert_array_equal(out, [3.0, 6.0])


def test_derivative_of_quotient():
    e = parse("R1^2/(R1+R2)", C2)
    d = differentiate(e, 0)
    x, y = 1.3, 2.1
    assert evaluate(d, (x, y)) == pytest.approx((2 * x * (x + y) - x**2) / (x + y) ** 2, rel=1e-14)


def test_derivative_of_constant_is_zero():
    assert evaluate(differentiate(parse("3.5", C2), 1), (1, 1)) == 0.0


def test_grid_rejects_tiny_axes():
    with pytest.raises(ValueError):
        Grid((0, 0), (1, 1), (2, 5))


def test_grid_geometry():
    g = Grid((0.0, 2.0), (1.0, 3.0), (11, 21))
    assert g.shape == (11, 21)
    assert g.spacing == pytest.approx((0.1, 0.05))
    assert g.point(g.center_index) == pytest.approx((0.5, 2.5))
    pts = g.random_points(50, seed=3, margin=0.1)
    assert pts.shape == (50, 2)
    assert np.all(pts[:, 0] >= 0.1) and np.all(pts[:, 0] <= 0.9)


# ---------------------------------------------------------------------------
# properties

_leaf = st.one_of(
    st.sampled_from(["R1", "R2"]),
    st.integers(min_value=1, max_value=9).map(str),
)


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})")
    unary = st.tuples(st.sampled_from(["sin", "cos", "exp"]), children).map(lambda t: f"{t[0]}({t[1]})")
    return st.one_of(binary, unary)


expressions = st.recursive(_leaf, _combine, max_leaves=6)
points = st.tuples(st.floats(0.2, 1.5), st.floats(0.2, 1.5))


@settings(max_examples=60, deadline=None)
@given(expressions, points)
def test_printing_round_trips(source, point):
    e = parse(source, C2)
    again = parse(to_string(e), C2)
    assert to_string(again) == to_string(e)
    assert evaluate(again, point) == evaluate(e, point)


@settings(max_examples=80, deadline=None)
@given(expressions, points, st.integers(0, 1))
def test_derivative_matches_fourth_order_difference(source, point, axis):
    e = parse(source, C2)
    d = evaluate(differentiate(e, axis), point)
    step = 1e-4 * max(1.0, abs(point[axis]))

    def at(k):
        p = list(point)
        p[axis] += k * step
        return evaluate(e, p)

    fd = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * step)
    assert abs(d - fd) <= 1e-6 * max(1.0, abs(d), abs(fd))


@settings(max_examples=40, deadline=None)
@given(expressions)
def test_printed_form_evaluates_identically(source):
    e = parse(source, C2)
    again = parse(to_string(e), C2)
    pts = np.random.default_rng(0).uniform(0.2, 1.5, size=(100, 2))
    np.testing.assert_array_equal(evaluate(again, (pts[:, 0], pts[:, 1])), evaluate(e, (pts[:, 0], pts[:, 1])))


def test_shared_subtrees_keep_derivatives_small():
    source = "R1"
    for _ in range(12):
        source = f"({source})*({source}) + R2"
    e = parse(source, C2)
    assert node_count(differentiate(e, 0)) < 50 * node_count(e)
