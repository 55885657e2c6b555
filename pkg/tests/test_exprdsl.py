"""Expression DSL.  Tags: [TRIVIAL] literal inputs, [DERIVED] symbolic or finite-difference oracles."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weylflow import exprdsl
from weylflow.exprdsl import (ArityError, BinOp, Const, DomainError, ExprSyntaxError, Neg,
                              UnknownIdentifier, Var, eval_jet, parse_expr, variables)


def test_literal_ast():
    # [TRIVIAL]
    e = parse_expr("1 + x1^2 + x2^2")
    assert e == BinOp("+", BinOp("+", Const(1.0), BinOp("^", Var(1), Const(2.0))), BinOp("^", Var(2), Const(2.0)))
    assert variables(e) == {1, 2}


def test_conformal_factor_parses():
    # [TRIVIAL]
    e = parse_expr("4/(1+x1^2+x2^2+x3^2+x4^2)^2", dim=4)
    assert eval_jet(e, (0, 0, 0, 0), 0).value == 4.0


def test_syntax_error_offset():
    # [TRIVIAL]
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("1 + * x1")
    assert err.value.offset == 4


@pytest.mark.parametrize("src,exc", [
    ("y1 + 1", UnknownIdentifier), ("x5", UnknownIdentifier), ("foo(x1)", UnknownIdentifier),
    ("sin(x1, x2)", ArityError), ("(x1", ExprSyntaxError), ("", ExprSyntaxError), ("x1 x2", ExprSyntaxError),
])
def test_errors(src, exc):
    with pytest.raises(exc):
        parse_expr(src, dim=4)


def test_precedence():
    # [TRIVIAL] ^ binds tighter than unary minus; ^ is right associative
    assert parse_expr("-x1^2") == Neg(BinOp("^", Var(1), Const(2.0)))
    assert eval_jet("2^3^2", (0.0,), 0).value == 512.0
    assert eval_jet("2*3-4/2", (0.0,), 0).value == 4.0
    assert eval_jet(" 1+ 2 *x1 ", (3.0,), 0).value == eval_jet("1+2*x1", (3.0,), 0).value


def test_polynomial_jet():
    # [TRIVIAL]
    j = eval_jet("x1^2", (3.0,), 2)
    assert (j.value, j.partial(1), j.partial(2)) == (9.0, 6.0, 2.0)


def test_sine_jet():
    # [TRIVIAL] Taylor series of sine at 0
    j = eval_jet("sin(x1)", (0.0,), 3)
    assert [j.partial(k) for k in range(4)] == pytest.approx([0.0, 1.0, 0.0, -1.0], abs=1e-15)


def test_lcf_factor_jet():
    # [TRIVIAL] A = 1 + x1^2 + x2^2 + x3^2 at (1, 0, 0, 0)
    j = eval_jet("1+x1^2+x2^2+x3^2", (1.0, 0.0, 0.0, 0.0), 1)
    assert j.value == 2.0
    assert list(j.gradient()) == [2.0, 0.0, 0.0, 0.0]


def test_domain_error_names_node():
    with pytest.raises(DomainError) as err:
        eval_jet("log(x1 - 1)", (0.5,), 1)
    assert "log" in str(err.value)
    with pytest.raises(DomainError):
        eval_jet("1/x1", (0.0,), 0)
    with pytest.raises(DomainError):
        eval_jet("sqrt(x1)", (-1.0,), 0)


def test_params_and_profiles():
    e = parse_expr("c*h(x1)^2", dim=2, params=("c",), profiles=("h",))

    def h(u0, order):
        return np.array([math.sin(u0), math.cos(u0), -math.sin(u0)][: order + 1] + [0.0] * max(0, order - 2))

    j = eval_jet(e, (0.7, 0.0), 2, {"c": 3.0, "h": h})
    assert j.value == pytest.approx(3 * math.sin(0.7) ** 2)
    assert j.partial(1, 0) == pytest.approx(3 * math.sin(1.4))
    assert j.partial(2, 0) == pytest.approx(6 * math.cos(1.4))


monomial = st.tuples(st.floats(-2, 2, allow_nan=False), st.integers(0, 2), st.integers(0, 2))


@given(st.lists(monomial, min_size=1, max_size=5), st.floats(-1, 1), st.floats(-1, 1))
def test_random_polynomials_exact(terms, a, b):
    # [DERIVED] coefficients of a degree <= 4 polynomial from its symbolic expansion
    src = " + ".join(f"({c!r})*x1^{i}*x2^{j}" for c, i, j in terms)
    jet = eval_jet(src, (a, b), 4)
    for p in range(5):
        for q in range(5 - p):
            want = sum(c * math.perm(i, p) * math.perm(j, q) * a ** max(i - p, 0) * b ** max(j - q, 0)
                       for c, i, j in terms if i >= p and j >= q)
            assert jet.partial(p, q) == pytest.approx(want, rel=1e-13, abs=1e-13)


@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_product_consistency(a, b):
    # [DERIVED] eval(e1 * e2) equals the jet product of the factors
    e1, e2 = "exp(x1)*cos(x2)", "1/(1+x1^2+x2^2)"
    lhs = eval_jet(f"({e1})*({e2})", (a, b), 4)
    rhs = eval_jet(e1, (a, b), 4) * eval_jet(e2, (a, b), 4)
    assert np.allclose(lhs.taylor, rhs.taylor, rtol=1e-13, atol=1e-14)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_order_monotonicity(a, b):
    # [TRIVIAL]
    lo, hi = eval_jet("sqrt(2+x1*x2)", (a, b), 2), eval_jet("sqrt(2+x1*x2)", (a, b), 4)
    assert np.array_equal(hi.taylor[: lo.taylor.size], lo.taylor)


def test_against_finite_differences():
    # [DERIVED] mixed second partial by central differences
    src = "exp(x1*x2)/sqrt(1+x3^2)"
    f = lambda x: math.exp(x[0] * x[1]) / math.sqrt(1 + x[2] ** 2)
    p = np.array([0.3, -0.4, 0.5])
    h = 1e-4
    e1, e2 = np.eye(3)[0] * h, np.eye(3)[1] * h
    fd = (f(p + e1 + e2) - f(p + e1 - e2) - f(p - e1 + e2) + f(p - e1 - e2)) / (4 * h * h)
    assert eval_jet(src, p, 2).partial(1, 1, 0) == pytest.approx(fd, rel=1e-6)


def test_str_roundtrip():
    e = parse_expr("4/(1+x1^2)^2 - sin(x2)*pi")
    assert parse_expr(str(e)) == e
    assert exprdsl.FUNCTIONS == ("sin", "cos", "exp", "log", "sqrt")
