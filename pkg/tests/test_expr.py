import math
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import trees
from oracles import to_sympy
from kinsym import expr as E
from kinsym.classify import residual_27
from kinsym.expr import (
    Domain, DomainError, Env, Instantiation, UnboundSymbolError, Verdict, diff, evaluate, expand, is_zero,
    normalize, parse, to_text,
)
from kinsym.parse import ParseError

t, x, c, f, P = (E.sym(n) for n in "txcfP")
POINT = {"t": 0.7, "x": -1.3, "c": 1.1, "f": 0.9, "P": 1.4, "Q": -0.6}
points = st.fixed_dictionaries({
    "t": st.floats(0.5, 2.0), "x": st.floats(-2.0, -0.5), "c": st.floats(0.5, 2.0),
    "f": st.floats(0.5, 2.0), "P": st.floats(0.3, 2.0), "Q": st.floats(-2.0, -0.3),
})


def value(e, env):
    with np.errstate(all="ignore"):
        return float(np.asarray(E.evaluate_array(e, env), dtype=float))


# --- parse ------------------------------------------------------------------

def test_parse_simple_sum():
    assert parse("c^2 + n") == E.add(E.power(c, E.const(2)), E.sym("n"))


def test_parse_table_row():
    e = parse("P*f^(-1) + Q")
    assert e == E.add(E.mul(P, E.power(f, E.const(-1))), E.sym("Q"))
    assert evaluate(e, {"P": 3, "f": 2, "Q": 1}) == 2.5


def test_parse_placeholder_application():
    e = parse("G((x - c*t)^2 + 1 + c^2)")
    assert isinstance(e, E.Apply) and e.name == "G"
    assert E.placeholders(e) == {"G": 1}


def test_parse_declared_placeholders_and_derivatives():
    e = parse("funcs: H\nH'(c) + Psi'[0,1](t, f)")
    assert E.placeholders(e) == {"H": 1, "Psi": 2}
    assert parse(to_text(e), placeholders=("H", "Psi")) == e


@pytest.mark.parametrize("text, offset", [
    ("c + * f", 4),
    ("c^2 + (f", 8),
    ("λ + $", 5),          # λ is two bytes in UTF-8
    ("foo(x)", 0),
    ("exp + 1", 0),
    ("c f", 2),
])
def test_parse_errors_report_byte_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.offset == offset
    assert f"byte {offset}" in str(info.value)


def test_parse_rejects_undeclared_derivative():
    with pytest.raises(ParseError):
        parse("P'(x)")


def test_unicode_parameters_are_symbols():
    assert E.free_symbols(parse("λ*c + μ")) == {"λ", "c", "μ"}


# --- diff -------------------------------------------------------------------

def test_diff_examples():
    assert diff(c * f, "c") == f
    j = E.sym("j")
    got = diff(P * f ** j, "f")
    assert is_zero(got - P * j * f ** (j - 1)).is_zero
    g = parse("G(c^3*f)")
    assert diff(g, "c") == parse("G'(c^3*f)*3*c^2*f")


def test_diff_of_constant_and_foreign_variable():
    assert diff(E.const(5), "t") == E.ZERO
    assert diff(parse("P*x^2"), "t") == E.ZERO


def test_diff_matches_sympy():
    for text in ("exp(c*t)/(1 + x^2)", "ln(abs(f))*c^3", "sqrt(c^2 + 1)*t^(3/2)", "atan(t/x) + tanh(c)"):
        e = parse(text)
        for v in "txcf":
            ours = to_sympy(to_text(diff(e, v)))
            ref = sp.diff(to_sympy(text), sp.Symbol(v, real=True))
            pt = {sp.Symbol(k, real=True): val for k, val in POINT.items()}
            assert abs(complex(ours.subs(pt)) - complex(ref.subs(pt))) < 1e-12


# --- normalize --------------------------------------------------------------

def test_normalize_cancels_and_merges():
    assert normalize(c * f - f * c) == E.ZERO
    assert normalize(c ** 2 * c ** -2) == E.ONE
    assert parse("2*c + 3*c") == parse("5*c")


def test_exp_ln_not_rewritten():
    e = parse("exp(ln(f))")
    assert normalize(e) != f
    assert isinstance(normalize(e), E.Func)


def test_exact_rationals():
    e = parse("1/3 + 1/6")
    assert e == E.const(Fraction(1, 2))


def test_expr_is_immutable_and_hashable():
    e = parse("c^2 + f")
    with pytest.raises(AttributeError):
        e.foo = 1
    assert hash(e) == hash(parse("f + c^2"))


# --- evaluation ---------------------------------------------------------------

def test_eval_examples():
    assert evaluate(parse("c^2 + 1"), {"c": 2}) == 5
    assert evaluate(parse("P*f^(-1)"), {"P": 3, "f": 2}) == 1.5


def test_eval_so3_representative_with_identity_placeholder():
    e = parse("(((x - c*t)^2 + 1 + c^2)/(1 + x^2 + t^2))^(3/2)*G(((x - c*t)^2 + 1 + c^2)^(3/2)*f)")
    ident = Instantiation.from_text("id", "_z0")
    assert evaluate(e, Env({"t": 0, "x": 0, "c": 0, "f": 1}, {"G": ident})) == pytest.approx(1.0)


def test_eval_with_callable_placeholder():
    env = Env({"c": 0.3}, {"G": (math.sin, math.cos, lambda z: -math.sin(z))})
    assert evaluate(parse("G''(c)"), env) == pytest.approx(-math.sin(0.3))


def test_eval_errors():
    with pytest.raises(DomainError):
        evaluate(parse("ln(c)"), {"c": -1.0})
    with pytest.raises(DomainError):
        evaluate(parse("c^(1/2)"), {"c": -1.0})
    with pytest.raises(UnboundSymbolError):
        evaluate(parse("c + P"), {"c": 1.0})


def test_json_round_trip():
    e = parse("G'(c^3*f)*exp(-t) + abs(x)^(2/3)")
    assert E.from_json(E.to_json(e)) == e


def test_substitute_function():
    e = parse("G(c^3*f) + G'(t)")
    out = E.substitute_function(e, "G", parse("2*_z0 + 1"))
    assert out == parse("2*c^3*f + 3")


# --- zero test ----------------------------------------------------------------

def test_is_zero_symbolic():
    assert is_zero(c - c).kind == Verdict.SYMBOLIC


def test_is_zero_free_particle_projective_generator():
    res = residual_27(E.ZERO, t ** 2, t * x).expr
    assert is_zero(res).kind == Verdict.SYMBOLIC


def test_is_zero_reports_witness_for_nonzero():
    res = residual_27(parse("P/f"), t, x).expr
    v = is_zero(res)
    assert v.kind == Verdict.NONZERO
    w = v.witness
    assert v.value == pytest.approx(2 * w["P"] / w["f"], rel=1e-12)


def test_is_zero_numeric_tier():
    # sin^2 + cos^2 - 1 is not recognised symbolically
    v = is_zero(parse("sin(c)^2 + cos(c)^2 - 1"))
    assert v.kind == Verdict.NUMERIC


def test_is_zero_uses_several_instantiations():
    # vanishes for G(z) = z^2 + 1 (G'' = 2) but not for the bump function
    e = parse("G''(c) - 2")
    assert is_zero(e).kind == Verdict.NONZERO


def test_is_zero_respects_constraints():
    e = parse("1/(j + 1)")
    v = is_zero(e, constraints=["j != -1"])
    assert v.kind == Verdict.NONZERO
    assert abs(v.witness["j"] + 1) >= 0.1


def test_is_zero_all_singular():
    with pytest.raises(DomainError):
        is_zero(parse("ln(-f^2)"), symbolic=False)


def test_is_zero_is_deterministic():
    e = parse("c*f - t")
    assert is_zero(e, seed=4).witness == is_zero(e, seed=4).witness


def test_domain_boxes():
    dom = Domain({"c": [(0.5, 1.0)]})
    rng = np.random.default_rng(0)
    vals = Domain.draw(rng, dom.box("c"), 200)
    assert vals.min() >= 0.5 and vals.max() <= 1.0


# --- properties -----------------------------------------------------------------

@settings(max_examples=1000)
@given(trees(6), points)
def test_normalize_idempotent_and_value_preserving(e, pt):
    n1 = normalize(e)
    assert normalize(n1) == n1
    a, b = value(e, pt), value(n1, pt)
    assume(math.isfinite(a) and abs(a) < 1e12)
    assert b == pytest.approx(a, rel=1e-12, abs=1e-12)


@settings(max_examples=300)
@given(trees(4), points)
def test_expand_preserves_value(e, pt):
    a = value(e, pt)
    assume(math.isfinite(a) and abs(a) < 1e8)
    assert value(expand(e), pt) == pytest.approx(a, rel=1e-9, abs=1e-9)


@settings(max_examples=300)
@given(trees(4), points, st.sampled_from("txcf"))
def test_diff_agrees_with_central_difference(e, pt, v):
    h = 1e-6
    d = value(diff(e, v), pt)
    lo, hi, mid = (value(e, {**pt, v: pt[v] + s}) for s in (-h, h, 0.0))
    assume(all(math.isfinite(u) and abs(u) < 1e3 for u in (d, lo, hi, mid)))
    # keep away from points where the third derivative is large
    d3 = value(diff(diff(diff(e, v), v), v), pt)
    assume(math.isfinite(d3) and abs(d3) < 1e4)
    assert abs(d - (hi - lo) / (2 * h)) <= 1e-5 * (1 + abs(d))


@settings(max_examples=500)
@given(trees(5))
def test_print_parse_round_trip(e):
    assert parse(to_text(e)) == normalize(e)


@settings(max_examples=200)
@given(trees(4))
def test_json_round_trip_property(e):
    assert E.from_json(E.to_json(e)) == e
