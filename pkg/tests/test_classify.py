import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from conftest import polynomial_force, polynomial_tx
from kinsym import expr as E
from kinsym.classify import (
    AnsatzSpace, EQ27, estimate_dimension, lie_onshell_residual, residual_10, residual_10prime, residual_27,
)
from kinsym.expr import ZERO, Verdict, expand, is_zero, parse, to_text
from kinsym.fields import prolong_tx

PROJECTIVE = [("1", "0"), ("0", "1"), ("t", "0"), ("x", "0"), ("0", "t"), ("0", "x"),
              ("t^2", "t*x"), ("t*x", "x^2")]


def r27(F, tau, xi):
    return residual_27(parse(F), parse(tau), parse(xi)).expr


def test_residual_27_examples():
    assert expand(r27("0", "t^2", "t*x")) == ZERO
    assert expand(r27("P*f^(-1)", "t", "-x")) == ZERO
    assert expand(r27("P*f^(-1)", "t", "x") - parse("2*P/f")) == ZERO
    assert residual_27(ZERO, ZERO, ZERO).source == EQ27


def test_residual_27_matches_printed_equation():
    cases = [("P*f^j", "3*t", "3*x"), ("A*c^a", "t", "x"), ("G(c)/t", "t", "x"), ("exp(c)*x*f^2", "t*x", "t^2")]
    for F, tau, xi in cases:
        ref = O.classifying_residual(O.to_sympy(F), O.to_sympy(tau), O.to_sympy(xi))
        assert sp.simplify(O.to_sympy(to_text(r27(F, tau, xi))) - ref) == 0


def test_residual_10_examples():
    a = "a"
    X = prolong_tx(parse("t"), parse(f"(({a} - 2)/({a} - 1))*x"))
    assert is_zero(residual_10prime(parse("A*c^a"), X).expr, constraints=["a != 1"]).is_zero
    X = prolong_tx(parse("t^2"), parse("t*x"))
    assert expand(residual_10prime(parse("A/x^3"), X).expr) == ZERO
    zero = prolong_tx(ZERO, ZERO)
    assert expand(residual_10(parse("P*c^2*f + exp(t*x)"), zero).expr) == ZERO


def test_residual_10prime_rejects_f_dependence():
    with pytest.raises(ValueError):
        residual_10prime(parse("P/f"), prolong_tx(E.ONE, ZERO))


def test_residual_27_cubic_in_c_for_free_force():
    tau, xi = parse("t^2*x + x^3"), parse("t^3 - t*x^2")
    poly = sp.Poly(O.to_sympy(to_text(residual_27(ZERO, tau, xi).expr)), O.c)
    assert poly.degree() <= 3


def test_lie_onshell_free_force_projective_algebra():
    for tau, xi in PROJECTIVE:
        res = lie_onshell_residual(ZERO, prolong_tx(parse(tau), parse(xi)))
        assert all(expand(v) == ZERO for v in res.jet_coefficients.values())


def test_lie_onshell_linear_density_force():
    res = lie_onshell_residual(parse("P*f"), prolong_tx(parse("3*t"), parse("3*x")))
    assert is_zero(res.expr, variables=("t", "x", "c", "f", "f_x", "f_c")).is_zero


def test_lie_onshell_detects_non_symmetry():
    res = lie_onshell_residual(parse("P*f^2"), prolong_tx(parse("t"), parse("x")))
    verdicts = [is_zero(e) for e in res.jet_coefficients.values()]
    assert any(v.kind == Verdict.NONZERO for v in verdicts)


def test_lie_onshell_inverse_density_force_is_free_transport():
    # for F = P/f the flux term (F f)_c vanishes, so the kinetic equation is free
    # transport and the scaling is a point symmetry although the force changes
    X = prolong_tx(parse("t"), parse("x"))
    assert is_zero(residual_27(parse("P/f"), X.tau, X.xi).expr).kind == Verdict.NONZERO
    res = lie_onshell_residual(parse("P/f"), X)
    assert all(is_zero(e).is_zero for e in res.jet_coefficients.values())


def test_ansatz_space_dimension():
    for d in range(5):
        assert AnsatzSpace(d).dimension == 2 * (d + 1) * (d + 2) // 2
    with pytest.raises(ValueError):
        AnsatzSpace(-1)


@pytest.mark.parametrize("F, degree, params, expected", [
    ("0", 2, None, 8),
    ("0", 3, None, 8),
    ("P/f", 2, {"P": 1.7}, 5),
    ("P*f^2", 3, {"P": 1.3}, 4),
    ("f^2 + c^4", 3, None, 2),
])
def test_estimate_dimension(F, degree, params, expected):
    est = estimate_dimension(parse(F), degree, params=params)
    assert est.dim == expected
    for tau, xi in est.basis:
        assert is_zero(residual_27(parse(F), tau, xi).expr, fixed=params).is_zero


def test_dimension_of_so3_representative():
    F = parse("(((x - c*t)^2 + 1 + c^2)/(1 + x^2 + t^2))^(3/2)*G(((x - c*t)^2 + 1 + c^2)^(3/2)*f)")
    assert estimate_dimension(F, 3).dim == 3


def test_dimension_of_exp_t_f_squared():
    # exp(t)*f^2 = exp(k t) G(exp(2 k t) f) with k = 1/5 and G(z) = z^2, so it carries
    # three generators, not one; the recovered basis is checked against the printed equation
    est = estimate_dimension(parse("exp(t)*f^2"), 3)
    assert est.dim == 3
    F = O.to_sympy("exp(t)*f^2")
    for tau, xi in est.basis:
        ref = O.classifying_residual(F, O.to_sympy(to_text(tau)), O.to_sympy(to_text(xi)))
        assert sp.simplify(ref) == 0
    assert sp.simplify(O.classifying_residual(F, 1, O.x / 5)) == 0


def test_dimension_report_json():
    out = estimate_dimension(parse("P/f"), 2, params={"P": 1.7}).to_json()
    assert set(out) == {"F", "degree", "dim", "basis", "condition_estimate"}
    assert out["dim"] == len(out["basis"]) == 5


def test_dimension_requires_enough_samples():
    with pytest.raises(ValueError):
        estimate_dimension(ZERO, 3, n_samples=10)


# --- properties -----------------------------------------------------------------

@settings(max_examples=60)
@given(polynomial_force(), polynomial_tx(3), polynomial_tx(3))
def test_residual_10_equals_residual_27(F, tau, xi):
    a = residual_10(F, prolong_tx(tau, xi)).expr
    b = residual_27(F, tau, xi).expr
    assert expand(a - b) == ZERO


@settings(max_examples=60)
@given(polynomial_force(), polynomial_tx(2), polynomial_tx(2), polynomial_tx(2), polynomial_tx(2),
       st.integers(-3, 3), st.integers(-3, 3))
def test_residual_linear_in_generator(F, t1, x1, t2, x2, a, b):
    lhs = residual_27(F, a * t1 + b * t2, a * x1 + b * x2).expr
    rhs = a * residual_27(F, t1, x1).expr + b * residual_27(F, t2, x2).expr
    assert expand(lhs - rhs) == ZERO


@settings(max_examples=30)
@given(polynomial_force(), polynomial_tx(2), polynomial_tx(2))
def test_residual_27_matches_oracle_on_random_input(F, tau, xi):
    ref = O.classifying_residual(*(O.to_sympy(to_text(e)) for e in (F, tau, xi)))
    assert sp.expand(O.to_sympy(to_text(residual_27(F, tau, xi).expr)) - ref) == 0


@settings(max_examples=50)
@given(polynomial_force())
def test_dimension_never_exceeds_eight(F):
    assert estimate_dimension(F, 2).dim <= 8
