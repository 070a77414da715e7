import os
import sys
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, reject, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from kinsym import expr as E  # noqa: E402

settings.register_profile(
    "kinsym", deadline=None, derandomize=True, print_blob=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("kinsym")

LEAVES = st.one_of(
    st.sampled_from([E.sym(n) for n in ("t", "x", "c", "f", "P", "Q")]),
    st.builds(lambda p, q: E.const(Fraction(p, q)), st.integers(-4, 4), st.integers(1, 3)),
)


_UNARY = (
    lambda a: E.func("exp", E.mul(E.const(Fraction(1, 4)), a)),
    lambda a: E.func("ln", E.add(E.const(1), E.power(a, E.const(2)))),
    lambda a: E.sqrt(E.add(E.const(2), E.func("abs", a))),
)
_BINARY = (E.add, lambda a, b: E.add(a, E.neg(b)), E.mul)


@st.composite
def trees(draw, depth: int = 6):
    """Random expression trees of depth at most ``depth`` over the full kernel."""
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        return draw(LEAVES)
    kind = draw(st.sampled_from(("binary", "power", "unary")))
    a = draw(trees(depth - 1))
    try:
        if kind == "binary":
            return draw(st.sampled_from(_BINARY))(a, draw(trees(depth - 1)))
        if kind == "power":
            return E.power(a, E.const(draw(st.integers(-2, 3))))
        return draw(st.sampled_from(_UNARY))(a)
    except ZeroDivisionError:  # literal 1/0
        reject()


def polynomial_force():
    """Random polynomial forces in (t, x, c, f) with small integer coefficients."""
    mono = st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 3), st.integers(0, 2))
    term = st.tuples(st.integers(-3, 3).filter(bool), mono)

    def build(terms):
        out = []
        for k, (a, b, cc, d) in terms:
            out.append(E.mul(E.const(k), *(E.power(E.sym(n), E.const(p)) for n, p in zip("txcf", (a, b, cc, d)) if p)))
        return E.add(*out)

    return st.lists(term, min_size=1, max_size=4).map(build)


def polynomial_tx(max_degree: int = 2):
    mono = st.tuples(st.integers(0, max_degree), st.integers(0, max_degree)).filter(lambda m: sum(m) <= max_degree)
    term = st.tuples(st.integers(-3, 3), mono)

    def build(terms):
        return E.add(*(E.mul(E.const(k), E.power(E.sym("t"), E.const(i)), E.power(E.sym("x"), E.const(j)))
                       for k, (i, j) in terms))

    return st.lists(term, min_size=0, max_size=3).map(build)


@pytest.fixture(scope="session")
def catalog():
    from kinsym.catalog import load_catalog

    return load_catalog()


@pytest.fixture(scope="session")
def catalog_by_id(catalog):
    return {e.id: e for e in catalog}
