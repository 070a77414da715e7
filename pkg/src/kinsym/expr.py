"""Symbolic expression kernel.

Expressions are immutable trees over the phase-space variables ``t, x, c, f``,
named parameters and placeholder functions (``G``, ``Phi``, ``Psi``).  All
constructors normalize eagerly, so structurally equal expressions compare
equal and hash alike.  Floats only appear at evaluation time; constants are
kept as :class:`fractions.Fraction`.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

VARIABLES = ("t", "x", "c", "f")
#: coordinate name of the force law when it is treated as an independent variable
FORCE = "Force"

FUNCTIONS = ("exp", "ln", "abs", "sin", "cos", "tan", "sinh", "cosh", "tanh", "atan")

# expansion guard: products producing more terms than this are left alone
_MAX_EXPAND_TERMS = 4000


class DomainError(ArithmeticError):
    """Raised when an expression is evaluated outside its real domain."""


class UnboundSymbolError(KeyError):
    """Raised when evaluation meets a symbol or placeholder with no binding."""


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite constant")
        return Fraction(value).limit_denominator(10**12)
    return Fraction(value)


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_hash", "_key")
    _rank = 0

    def _fields(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        return type(self) is type(other) and hash(self) == hash(other) and self._fields() == other._fields()

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + self._fields())
            object.__setattr__(self, "_hash", h)
            return h

    def __setattr__(self, key, value):
        raise AttributeError("Expr nodes are immutable")

    @property
    def sort_key(self) -> tuple:
        try:
            return self._key
        except AttributeError:
            k = self._make_key()
            object.__setattr__(self, "_key", k)
            return k

    def _make_key(self) -> tuple:
        raise NotImplementedError

    @property
    def args(self) -> tuple:
        return ()

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), ONE_NEG))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, ONE_NEG))

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        return to_text(self)


class Const(Expr):
    __slots__ = ("value",)
    _rank = 0

    def __init__(self, value):
        object.__setattr__(self, "value", _frac(value))

    def _fields(self):
        return (self.value,)

    def _make_key(self):
        return (0, self.value)


class Sym(Expr):
    """A variable (``t, x, c, f``), the force coordinate, or a parameter."""

    __slots__ = ("name",)
    _rank = 1

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def _fields(self):
        return (self.name,)

    def _make_key(self):
        # variables sort before parameters
        return (1, 0 if self.name in VARIABLES else 1, self.name)


class Add(Expr):
    __slots__ = ("terms",)
    _rank = 5

    def __init__(self, terms: tuple):
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def args(self):
        return self.terms

    def _fields(self):
        return self.terms

    def _make_key(self):
        return (5, len(self.terms)) + tuple(t.sort_key for t in self.terms)


class Mul(Expr):
    __slots__ = ("factors",)
    _rank = 4

    def __init__(self, factors: tuple):
        object.__setattr__(self, "factors", tuple(factors))

    @property
    def args(self):
        return self.factors

    def _fields(self):
        return self.factors

    def _make_key(self):
        return (4, len(self.factors)) + tuple(t.sort_key for t in self.factors)


class Pow(Expr):
    __slots__ = ("base", "exp")
    _rank = 3

    def __init__(self, base: Expr, exp: Expr):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exp", exp)

    @property
    def args(self):
        return (self.base, self.exp)

    def _fields(self):
        return (self.base, self.exp)

    def _make_key(self):
        return (3, self.base.sort_key, self.exp.sort_key)


class Func(Expr):
    """Elementary function application: exp, ln, abs and the trigonometric family."""

    __slots__ = ("name", "arg")
    _rank = 2

    def __init__(self, name: str, arg: Expr):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)

    @property
    def args(self):
        return (self.arg,)

    def _fields(self):
        return (self.name, self.arg)

    def _make_key(self):
        return (2, 0, self.name, self.arg.sort_key)


class Apply(Expr):
    """Placeholder function ``G(u)`` (or ``Psi(u, v)``) with a derivative multi-index."""

    __slots__ = ("name", "arguments", "orders")
    _rank = 2

    def __init__(self, name: str, arguments: tuple, orders: tuple | None = None):
        arguments = tuple(arguments)
        orders = tuple(orders) if orders is not None else (0,) * len(arguments)
        if len(orders) != len(arguments):
            raise ValueError("derivative orders must match the number of arguments")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arguments", arguments)
        object.__setattr__(self, "orders", orders)

    @property
    def args(self):
        return self.arguments

    def _fields(self):
        return (self.name, self.orders) + self.arguments

    def _make_key(self):
        return (2, 1, self.name, self.orders) + tuple(a.sort_key for a in self.arguments)


ZERO = Const(0)
ONE = Const(1)
ONE_NEG = Const(-1)
HALF = Const(Fraction(1, 2))

t, x, c, f = (Sym(n) for n in VARIABLES)


def sym(name: str) -> Sym:
    return Sym(name)


def const(value) -> Const:
    return Const(value)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        from .parse import parse

        return parse(value)
    if isinstance(value, (int, Fraction, float)) and not isinstance(value, bool):
        return Const(value)
    raise TypeError(f"cannot convert {value!r} to Expr")


# ---------------------------------------------------------------------------
# normalizing constructors
# ---------------------------------------------------------------------------

def _split_coeff(term: Expr) -> tuple[Fraction, Expr | None]:
    if isinstance(term, Const):
        return term.value, None
    if isinstance(term, Mul) and isinstance(term.factors[0], Const):
        rest = term.factors[1:]
        return term.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return Fraction(1), term


def _scale(coeff: Fraction, rest: Expr | None) -> Expr:
    if rest is None:
        return Const(coeff)
    if coeff == 1:
        return rest
    if coeff == 0:
        return ZERO
    if isinstance(rest, Mul):
        return Mul((Const(coeff),) + rest.factors)
    return Mul((Const(coeff), rest))


def add(*terms: Expr) -> Expr:
    collected: dict[Expr | None, Fraction] = {}
    stack = list(terms)
    stack.reverse()
    while stack:
        term = stack.pop()
        if not isinstance(term, Expr):
            term = as_expr(term)
        if isinstance(term, Add):
            stack.extend(reversed(term.terms))
            continue
        coeff, rest = _split_coeff(term)
        if coeff == 0:
            continue
        collected[rest] = collected.get(rest, Fraction(0)) + coeff
    constant = collected.pop(None, Fraction(0))
    out = [_scale(v, k) for k, v in collected.items() if v != 0]
    out.sort(key=lambda e: e.sort_key)
    if constant != 0:
        out.insert(0, Const(constant))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(tuple(out))


def neg(e: Expr) -> Expr:
    return mul(ONE_NEG, e)


def mul(*factors: Expr) -> Expr:
    coeff = Fraction(1)
    exponents: dict[Expr, list[Expr]] = {}
    stack = list(factors)
    stack.reverse()
    while stack:
        fac = stack.pop()
        if not isinstance(fac, Expr):
            fac = as_expr(fac)
        if isinstance(fac, Mul):
            stack.extend(reversed(fac.factors))
            continue
        if isinstance(fac, Const):
            coeff *= fac.value
            if coeff == 0:
                return ZERO
            continue
        if isinstance(fac, Pow):
            exponents.setdefault(fac.base, []).append(fac.exp)
        else:
            exponents.setdefault(fac, []).append(ONE)
    out: list[Expr] = []
    redo = False
    for base, exps in exponents.items():
        p = power(base, add(*exps)) if len(exps) > 1 else power(base, exps[0])
        if isinstance(p, Const):
            coeff *= p.value
            if coeff == 0:
                return ZERO
        elif isinstance(p, Mul):
            redo = True
            out.append(p)
        else:
            out.append(p)
    if redo:
        return mul(Const(coeff), *out)
    out.sort(key=lambda e: e.sort_key)
    if not out:
        return Const(coeff)
    if coeff != 1:
        out.insert(0, Const(coeff))
    if len(out) == 1:
        return out[0]
    return Mul(tuple(out))


_EXACT_LIMIT = 64  # larger exponents (typically from substituted floats) stay unevaluated


def _small(v: Fraction, bits: int = 256) -> bool:
    return v.numerator.bit_length() <= bits and v.denominator.bit_length() <= bits


def _exact_root(value: Fraction, exponent: Fraction) -> Fraction | None:
    """Exact ``value**exponent`` for positive rationals when the root is rational."""
    if value <= 0 or exponent.denominator > _EXACT_LIMIT or abs(exponent.numerator) > _EXACT_LIMIT:
        return None
    if not _small(value):
        return None
    q = exponent.denominator
    num = round(value.numerator ** (1.0 / q))
    den = round(value.denominator ** (1.0 / q))
    for n_ in (num - 1, num, num + 1):
        for d_ in (den - 1, den, den + 1):
            if n_ > 0 and d_ > 0 and Fraction(n_, d_) ** q == value:
                return Fraction(n_, d_) ** exponent.numerator
    return None


def power(base: Expr, exp: Expr) -> Expr:
    if isinstance(exp, Const):
        e = exp.value
        if e == 0:
            return ONE
        if e == 1:
            return base
        if isinstance(base, Const):
            b = base.value
            if e.denominator == 1:
                if b == 0 and e < 0:
                    raise ZeroDivisionError("0 raised to a negative power")
                if b in (0, 1) or (abs(e) <= _EXACT_LIMIT and _small(b)) or (b == -1):
                    return Const(b ** int(e))
                return Pow(base, exp)
            if b == 1:
                return ONE
            r = _exact_root(b, e)
            if r is not None:
                return Const(r)
            return Pow(base, exp)
        if e.denominator == 1:
            if isinstance(base, Pow):
                return power(base.base, mul(base.exp, exp))
            if isinstance(base, Mul):
                return mul(*(power(fac, exp) for fac in base.factors))
        elif isinstance(base, Pow) and isinstance(base.exp, Const) and base.exp.value.denominator != 1 \
                and base.exp.value.numerator % 2 == 1:
            # (u^(p/q))^r with odd p keeps sign information, safe to merge
            return power(base.base, Const(base.exp.value * e))
        if isinstance(base, Mul) and isinstance(base.factors[0], Const) and base.factors[0].value > 0:
            # positive constant factors can be pulled out of fractional powers
            rest = mul(*base.factors[1:])
            return mul(power(base.factors[0], exp), power(rest, exp))
    elif isinstance(base, Const) and base.value == 1:
        return ONE
    return Pow(base, exp)


def sqrt(e: Expr) -> Expr:
    return power(e, HALF)


def func(name: str, arg: Expr) -> Expr:
    if name == "sqrt":
        return sqrt(arg)
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(arg, Const):
        v = arg.value
        if name == "exp" and v == 0:
            return ONE
        if name == "ln" and v == 1:
            return ZERO
        if name == "abs":
            return Const(abs(v))
        if v == 0 and name in ("sin", "tan", "sinh", "tanh", "atan"):
            return ZERO
        if v == 0 and name in ("cos", "cosh"):
            return ONE
    if name == "abs":
        if isinstance(arg, Func) and arg.name in ("abs", "exp"):
            return arg
        if isinstance(arg, Mul) and isinstance(arg.factors[0], Const):
            return mul(Const(abs(arg.factors[0].value)), func("abs", mul(*arg.factors[1:])))
    return Func(name, arg)


def exp(e):
    return func("exp", as_expr(e))


def ln(e):
    return func("ln", as_expr(e))


def apply(name: str, *arguments: Expr, orders: Iterable[int] | None = None) -> Apply:
    return Apply(name, tuple(as_expr(a) for a in arguments), tuple(orders) if orders is not None else None)


def rebuild(e: Expr, children: list[Expr]) -> Expr:
    """Rebuild ``e`` from new children through the normalizing constructors."""
    if isinstance(e, Add):
        return add(*children)
    if isinstance(e, Mul):
        return mul(*children)
    if isinstance(e, Pow):
        return power(children[0], children[1])
    if isinstance(e, Func):
        return func(e.name, children[0])
    if isinstance(e, Apply):
        return Apply(e.name, tuple(children), e.orders)
    return e


def normalize(e: Expr) -> Expr:
    """Bottom-up re-normalization; idempotent."""
    if isinstance(e, (Const, Sym)):
        return e
    return rebuild(e, [normalize(a) for a in e.args])


# ---------------------------------------------------------------------------
# traversal helpers
# ---------------------------------------------------------------------------

def free_symbols(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Sym):
            out.add(node.name)
        else:
            stack.extend(node.args)
    return out


def placeholders(e: Expr) -> dict[str, int]:
    """Placeholder function names mapped to their arity."""
    out: dict[str, int] = {}
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Apply):
            out[node.name] = len(node.arguments)
        stack.extend(node.args)
    return out


def parameters(e: Expr) -> set[str]:
    return {s for s in free_symbols(e) if s not in VARIABLES and s != FORCE}


def depends_on(e: Expr, name: str) -> bool:
    return name in free_symbols(e)


def size(e: Expr) -> int:
    return 1 + sum(size(a) for a in e.args)


def subs(e: Expr, mapping: Mapping[str, Expr | int | Fraction]) -> Expr:
    """Simultaneous substitution of symbols by expressions."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    cache: dict[Expr, Expr] = {}

    def go(node: Expr) -> Expr:
        if isinstance(node, Sym):
            return mapping.get(node.name, node)
        if isinstance(node, Const):
            return node
        hit = cache.get(node)
        if hit is not None:
            return hit
        out = rebuild(node, [go(a) for a in node.args])
        cache[node] = out
        return out

    return go(e)


def substitute_function(e: Expr, name: str, template: Expr, arity: int = 1) -> Expr:
    """Replace placeholder ``name`` by a concrete template in ``_z0, _z1, ...``.

    Derivatives of the placeholder are replaced by the matching derivatives of
    the template.
    """
    dummies = [f"_z{i}" for i in range(arity)]
    derived: dict[tuple, Expr] = {}

    def template_for(orders: tuple) -> Expr:
        if orders not in derived:
            out = template
            for i, k in enumerate(orders):
                for _ in range(k):
                    out = diff(out, dummies[i])
            derived[orders] = out
        return derived[orders]

    def go(node: Expr) -> Expr:
        if isinstance(node, (Sym, Const)):
            return node
        kids = [go(a) for a in node.args]
        if isinstance(node, Apply) and node.name == name:
            return subs(template_for(node.orders), dict(zip(dummies, kids)))
        return rebuild(node, kids)

    return go(e)


# ---------------------------------------------------------------------------
# differentiation and expansion
# ---------------------------------------------------------------------------

def diff(e: Expr, v: str | Sym, n: int = 1) -> Expr:
    """Partial derivative of ``e`` with respect to the symbol ``v`` (``n`` times)."""
    name = v.name if isinstance(v, Sym) else v
    out = e
    for _ in range(n):
        out = _diff(out, name, {})
    return out


def _diff(e: Expr, v: str, memo: dict) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Sym):
        return ONE if e.name == v else ZERO
    hit = memo.get(e)
    if hit is not None:
        return hit
    if isinstance(e, Add):
        out = add(*(_diff(a, v, memo) for a in e.terms))
    elif isinstance(e, Mul):
        parts = []
        facs = e.factors
        for i, fac in enumerate(facs):
            d = _diff(fac, v, memo)
            if d != ZERO:
                parts.append(mul(*facs[:i], d, *facs[i + 1:]))
        out = add(*parts)
    elif isinstance(e, Pow):
        db = _diff(e.base, v, memo)
        de = _diff(e.exp, v, memo)
        terms = []
        if db != ZERO:
            terms.append(mul(e.exp, power(e.base, add(e.exp, ONE_NEG)), db))
        if de != ZERO:
            terms.append(mul(e, func("ln", e.base), de))
        out = add(*terms)
    elif isinstance(e, Func):
        du = _diff(e.arg, v, memo)
        if du == ZERO:
            out = ZERO
        else:
            out = mul(_outer_derivative(e), du)
    elif isinstance(e, Apply):
        parts = []
        for i, a in enumerate(e.arguments):
            da = _diff(a, v, memo)
            if da != ZERO:
                orders = list(e.orders)
                orders[i] += 1
                parts.append(mul(Apply(e.name, e.arguments, tuple(orders)), da))
        out = add(*parts)
    else:  # pragma: no cover
        raise TypeError(type(e))
    memo[e] = out
    return out


def _outer_derivative(e: Func) -> Expr:
    u = e.arg
    name = e.name
    if name == "exp":
        return e
    if name == "ln":
        return power(u, ONE_NEG)
    if name == "abs":
        return mul(u, power(e, ONE_NEG))
    if name == "sin":
        return func("cos", u)
    if name == "cos":
        return neg(func("sin", u))
    if name == "tan":
        return add(ONE, power(e, Const(2)))
    if name == "sinh":
        return func("cosh", u)
    if name == "cosh":
        return func("sinh", u)
    if name == "tanh":
        return add(ONE, neg(power(e, Const(2))))
    if name == "atan":
        return power(add(ONE, power(u, Const(2))), ONE_NEG)
    raise ValueError(name)  # pragma: no cover


def expand(e: Expr) -> Expr:
    """Distribute products over sums and multiply out small positive integer powers."""
    if isinstance(e, (Const, Sym)):
        return e
    kids = [expand(a) for a in e.args]
    if isinstance(e, Mul):
        return _distribute(kids)
    if isinstance(e, Pow):
        base, ex = kids
        if isinstance(base, Add) and isinstance(ex, Const) and ex.value.denominator == 1 and 1 < ex.value <= 8:
            return _distribute([base] * int(ex.value))
        return power(base, ex)
    return rebuild(e, kids)


def _distribute(factors: list[Expr]) -> Expr:
    acc: list[Expr] = [ONE]
    for fac in factors:
        terms = fac.terms if isinstance(fac, Add) else (fac,)
        if len(acc) * len(terms) > _MAX_EXPAND_TERMS:
            return mul(*factors)
        acc = [mul(a, b) for a in acc for b in terms]
    return add(*acc)


def simplify(e: Expr) -> Expr:
    return expand(e)


# ---------------------------------------------------------------------------
# numeric evaluation
# ---------------------------------------------------------------------------

class Instantiation:
    """A concrete smooth function standing in for a placeholder.

    Built either from a template expression in ``_z0, _z1, ...`` (derivatives
    are taken symbolically) or, for one argument, from callables for the value
    and its first two derivatives.
    """

    def __init__(self, label: str, arity: int = 1, template: Expr | None = None,
                 callables: tuple[Callable, ...] | None = None):
        if template is None and callables is None:
            raise ValueError("need a template or callables")
        self.label = label
        self.arity = arity
        self.template = template
        self.callables = callables
        self._derived: dict[tuple, Expr] = {}

    @classmethod
    def from_text(cls, label: str, text: str, arity: int = 1) -> "Instantiation":
        from .parse import parse

        return cls(label, arity, template=parse(text))

    def derivative(self, orders: tuple) -> Expr:
        if orders not in self._derived:
            out = self.template
            for i, k in enumerate(orders):
                out = diff(out, f"_z{i}", k) if k else out
            self._derived[orders] = out
        return self._derived[orders]

    def __call__(self, orders: tuple, *args):
        if self.callables is not None:
            if self.arity != 1 or len(orders) != 1:
                raise ValueError("callable instantiations are single-argument")
            if orders[0] >= len(self.callables):
                raise ValueError(f"no derivative of order {orders[0]} supplied for {self.label}")
            return self.callables[orders[0]](*args)
        bindings = {f"_z{i}": a for i, a in enumerate(args)}
        return _eval_array(self.derivative(tuple(orders)), bindings, {})[0]

    def __repr__(self):
        return f"Instantiation({self.label!r})"


def _quadratic_template(arity: int) -> str:
    if arity == 1:
        return "_z0^2 + 1"
    terms = ["1"] + [f"{i + 1}*_z{i}^2" for i in range(arity)]
    terms += [f"_z{i}*_z{j}" for i in range(arity) for j in range(i + 1, arity)]
    return " + ".join(terms)


def _bump_template(arity: int) -> str:
    if arity == 1:
        return "exp(_z0/(1 + _z0^2))"
    num = " + ".join(f"_z{i}/{i + 1}" for i in range(arity))
    den = " + ".join(f"_z{i}^2" for i in range(arity))
    return f"exp(({num})/(1 + {den}))"


def default_instantiations(arity: int = 1) -> list[Instantiation]:
    """The two generic stand-ins for an arbitrary function: ``z^2+1`` and ``exp(z/(1+z^2))``."""
    return [
        Instantiation.from_text("quadratic", _quadratic_template(arity), arity),
        Instantiation.from_text("bump", _bump_template(arity), arity),
    ]


class Env:
    """Numeric bindings for evaluation: symbol values and placeholder instantiations."""

    def __init__(self, values: Mapping[str, float] | None = None,
                 funcs: Mapping[str, Instantiation | tuple] | None = None, seed: int = 0):
        self.values = dict(values or {})
        self.funcs: dict[str, Instantiation] = {}
        for name, inst in (funcs or {}).items():
            if not isinstance(inst, Instantiation):
                inst = Instantiation(name, 1, callables=tuple(inst))
            self.funcs[name] = inst
        self.seed = seed

    def bind(self, **values) -> "Env":
        return Env({**self.values, **values}, self.funcs, self.seed)


_UNARY = {
    "exp": np.exp, "sin": np.sin, "cos": np.cos, "tan": np.tan, "sinh": np.sinh,
    "cosh": np.cosh, "tanh": np.tanh, "atan": np.arctan, "abs": np.abs,
}


def _pow_values(b, e):
    b = np.asarray(b, dtype=float)
    e = np.asarray(e, dtype=float)
    return np.power(b, e)


def _eval_array(e: Expr, values: Mapping, funcs: Mapping[str, Instantiation], with_magnitude: bool = False):
    """Vectorized evaluation returning ``(value, magnitude)``.

    ``magnitude`` is the value obtained with every sum replaced by the sum of
    absolute values; it sets the scale against which cancellation is judged.
    Invalid points come back as NaN.
    """
    cache: dict[Expr, tuple] = {}

    def go(node: Expr):
        hit = cache.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            v = float(node.value)
            out = (v, abs(v))
        elif isinstance(node, Sym):
            try:
                v = values[node.name]
            except KeyError:
                raise UnboundSymbolError(node.name) from None
            v = np.asarray(v, dtype=float) if not isinstance(v, float) else v
            out = (v, np.abs(v))
        elif isinstance(node, Add):
            vals = [go(a) for a in node.terms]
            v = sum(p[0] for p in vals)
            m = sum(p[1] for p in vals) if with_magnitude else None
            out = (v, m)
        elif isinstance(node, Mul):
            v = 1.0
            m = 1.0
            for a in node.factors:
                av, am = go(a)
                v = v * av
                if with_magnitude:
                    m = m * am
            out = (v, m if with_magnitude else None)
        elif isinstance(node, Pow):
            bv, bm = go(node.base)
            ev, _ = go(node.exp)
            v = _pow_values(bv, ev)
            if with_magnitude:
                if isinstance(node.exp, Const) and node.exp.value > 0:
                    m = _pow_values(bm, ev)
                else:
                    m = np.abs(v)
            else:
                m = None
            out = (v, m)
        elif isinstance(node, Func):
            av, am = go(node.arg)
            if node.name == "ln":
                v = np.log(np.asarray(av, dtype=float))
            else:
                v = _UNARY[node.name](av)
            out = (v, np.abs(v) if with_magnitude else None)
        elif isinstance(node, Apply):
            inst = funcs.get(node.name)
            if inst is None:
                raise UnboundSymbolError(node.name)
            argv = [go(a)[0] for a in node.arguments]
            v = inst(node.orders, *argv)
            out = (v, np.abs(v) if with_magnitude else None)
        else:  # pragma: no cover
            raise TypeError(type(node))
        cache[node] = out
        return out

    with np.errstate(all="ignore"):
        return go(e)


def evaluate_array(e: Expr, values: Mapping, funcs: Mapping[str, Instantiation] | None = None,
                   with_magnitude: bool = False):
    """Evaluate on numpy arrays; NaN marks points outside the real domain."""
    v, m = _eval_array(e, values, funcs or {}, with_magnitude)
    if with_magnitude:
        return v, m
    return v


def evaluate(e: Expr, env: Env | Mapping[str, float]) -> float:
    """Evaluate ``e`` at a single point to an IEEE double."""
    if not isinstance(env, Env):
        env = Env(env)
    v, _ = _eval_array(e, env.values, env.funcs)
    v = float(np.asarray(v, dtype=float))
    if not math.isfinite(v):
        raise DomainError(f"{to_text(e)} is undefined at {env.values}")
    return v


def compile_expr(e: Expr, names: Iterable[str], funcs: Mapping[str, Instantiation] | None = None):
    """Return ``g(*arrays)`` evaluating ``e`` with the given positional symbol order."""
    names = tuple(names)
    funcs = dict(funcs or {})

    def g(*arrays, **extra):
        values = dict(zip(names, arrays))
        values.update(extra)
        return _eval_array(e, values, funcs)[0]

    return g


# ---------------------------------------------------------------------------
# printing and serialization
# ---------------------------------------------------------------------------

def _const_text(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _atom_text(e: Expr) -> str:
    s = to_text(e)
    if isinstance(e, (Sym, Func, Apply)) or (isinstance(e, Const) and e.value >= 0 and e.value.denominator == 1):
        return s
    return f"({s})"


def to_text(e: Expr) -> str:
    """Infix text in the parser grammar; ``parse(to_text(e)) == e``."""
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Add):
        out = ""
        for i, term in enumerate(e.terms):
            coeff, rest = _split_coeff(term)
            if i and coeff < 0:
                pos = _scale(-coeff, rest)
                out += " - " + (f"({to_text(pos)})" if isinstance(pos, Add) else to_text(pos))
            elif i:
                out += " + " + to_text(term)
            else:
                out = to_text(term)
        return out
    if isinstance(e, Mul):
        facs = list(e.factors)
        prefix = ""
        if isinstance(facs[0], Const) and facs[0].value == -1:
            prefix = "-"
            facs = facs[1:]
        parts = []
        for fac in facs:
            if isinstance(fac, Const):
                parts.append(_const_text(fac.value) if fac.value > 0 and fac.value.denominator == 1
                             else f"({_const_text(fac.value)})")
            elif isinstance(fac, Add):
                parts.append(f"({to_text(fac)})")
            else:
                parts.append(to_text(fac))
        return prefix + "*".join(parts)
    if isinstance(e, Pow):
        return f"{_atom_text(e.base)}^{_atom_text(e.exp)}"
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Apply):
        inner = ", ".join(to_text(a) for a in e.arguments)
        if not any(e.orders):
            return f"{e.name}({inner})"
        if len(e.orders) == 1 and e.orders[0] <= 3:
            return f"{e.name}{chr(39) * e.orders[0]}({inner})"
        idx = ",".join(str(k) for k in e.orders)
        return f"{e.name}'[{idx}]({inner})"
    raise TypeError(type(e))  # pragma: no cover


def to_json(e: Expr) -> dict:
    """Canonical prefix JSON form."""
    if isinstance(e, Const):
        return {"op": "const", "value": _const_text(e.value)}
    if isinstance(e, Sym):
        return {"op": "sym", "name": e.name}
    if isinstance(e, Add):
        return {"op": "add", "args": [to_json(a) for a in e.terms]}
    if isinstance(e, Mul):
        return {"op": "mul", "args": [to_json(a) for a in e.factors]}
    if isinstance(e, Pow):
        return {"op": "pow", "args": [to_json(e.base), to_json(e.exp)]}
    if isinstance(e, Func):
        return {"op": "fn", "name": e.name, "args": [to_json(e.arg)]}
    if isinstance(e, Apply):
        return {"op": "apply", "name": e.name, "orders": list(e.orders),
                "args": [to_json(a) for a in e.arguments]}
    raise TypeError(type(e))  # pragma: no cover


def from_json(data: Mapping) -> Expr:
    op = data["op"]
    if op == "const":
        return Const(Fraction(data["value"]))
    if op == "sym":
        return Sym(data["name"])
    args = [from_json(a) for a in data.get("args", [])]
    if op == "add":
        return add(*args)
    if op == "mul":
        return mul(*args)
    if op == "pow":
        return power(*args)
    if op == "fn":
        return func(data["name"], args[0])
    if op == "apply":
        return Apply(data["name"], tuple(args), tuple(data["orders"]))
    raise ValueError(f"unknown node kind {op!r}")


# ---------------------------------------------------------------------------
# zero testing
# ---------------------------------------------------------------------------

SIGNED_BOX = ((-2.0, -0.5), (0.5, 2.0))
POSITIVE_BOX = ((0.5, 2.0),)
PARAMETER_BOX = ((-2.0, -0.3), (0.3, 2.0))


class Constraint:
    """A parameter predicate ``lhs op rhs`` with op in ``!= > < >= <=``.

    ``!=`` is enforced with a margin so draws stay away from the excluded
    value; this keeps sampled residuals well conditioned.
    """

    OPS = ("!=", ">=", "<=", ">", "<")

    def __init__(self, text: str, margin: float = 0.1):
        self.text = text.strip()
        for op in self.OPS:
            if op in self.text:
                lhs, rhs = self.text.split(op, 1)
                self.op = op
                self.lhs = parse(lhs)
                self.rhs = parse(rhs)
                break
        else:
            raise ValueError(f"constraint {text!r} has no comparison operator")
        self.margin = margin

    @property
    def symbols(self) -> set[str]:
        return free_symbols(self.lhs) | free_symbols(self.rhs)

    def holds(self, values: Mapping[str, float]) -> bool:
        with np.errstate(all="ignore"):
            d = float(_eval_array(add(self.lhs, neg(self.rhs)), values, {})[0])
        if not math.isfinite(d):
            return False
        if self.op == "!=":
            return abs(d) >= self.margin
        if self.op in (">", ">="):
            return d > 0 if self.op == ">" else d >= 0
        return d < 0 if self.op == "<" else d <= 0

    def __repr__(self):
        return f"Constraint({self.text!r})"


class Domain:
    """Sampling boxes: each symbol maps to a union of intervals (drawn uniformly)."""

    def __init__(self, boxes: Mapping[str, Iterable[tuple[float, float]]] | None = None,
                 parameter_box=PARAMETER_BOX):
        self.boxes = {"t": SIGNED_BOX, "x": SIGNED_BOX, "c": SIGNED_BOX, "f": POSITIVE_BOX, FORCE: SIGNED_BOX}
        for k, v in (boxes or {}).items():
            self.boxes[k] = tuple(tuple(map(float, iv)) for iv in v)
        self.parameter_box = tuple(parameter_box)

    def box(self, name: str):
        return self.boxes.get(name, self.parameter_box)

    @staticmethod
    def draw(rng: np.random.Generator, box, n: int | None = None):
        lengths = np.array([b - a for a, b in box])
        which = rng.choice(len(box), size=n, p=lengths / lengths.sum())
        u = rng.random(size=n)
        lo = np.array([a for a, _ in box])[which]
        return lo + u * lengths[which]


class Verdict:
    SYMBOLIC = "SymbolicZero"
    NUMERIC = "NumericZero"
    NONZERO = "NonZero"

    def __init__(self, kind: str, witness: dict | None = None, value: float | None = None,
                 max_ratio: float = 0.0, checked: int = 0):
        self.kind = kind
        self.witness = witness
        self.value = value
        self.max_ratio = max_ratio
        self.checked = checked

    @property
    def is_zero(self) -> bool:
        return self.kind != self.NONZERO

    def __bool__(self):
        return self.is_zero

    def to_json(self) -> dict:
        out = {"verdict": self.kind, "samples": self.checked}
        if self.witness is not None:
            out["witness"] = self.witness
            out["value"] = self.value
        return out

    def __repr__(self):
        extra = f", witness={self.witness}, value={self.value:.3g}" if self.witness else ""
        return f"Verdict({self.kind}{extra})"


def draw_parameters(names: Iterable[str], rng: np.random.Generator, domain: Domain,
                    constraints: Iterable[Constraint] = (), fixed: Mapping[str, float] | None = None,
                    max_tries: int = 2000) -> dict[str, float]:
    """Rejection-sample parameter values honoring the constraints."""
    names = sorted(set(names) - set(fixed or {}))
    constraints = list(constraints)
    for _ in range(max_tries):
        values = {n: float(domain.draw(rng, domain.box(n))) for n in names}
        values.update(fixed or {})
        if all(cn.holds(values) for cn in constraints):
            return values
    raise DomainError(f"could not satisfy constraints {constraints}")


def sample_points(names: Iterable[str], n: int, rng: np.random.Generator, domain: Domain) -> dict:
    return {v: domain.draw(rng, domain.box(v), n) for v in names}


def is_zero(e: Expr, domain: Domain | None = None, n_samples: int = 100, tol: float = 1e-9,
            param_draws: int = 3, instantiations: list[Mapping[str, Instantiation]] | None = None,
            constraints: Iterable[Constraint | str] = (), fixed: Mapping[str, float] | None = None,
            seed: int = 0, symbolic: bool = True, variables: Iterable[str] | None = None) -> Verdict:
    """Two-tier zero test.

    The symbolic tier expands and normalizes.  The numeric tier evaluates at
    ``n_samples`` points for each of ``param_draws`` parameter draws and each
    placeholder instantiation set; a sample passes when
    ``|value| <= tol * (1 + magnitude)``, with magnitude the absolute-value
    evaluation of the expression tree.  Non-finite samples are treated as
    singular and skipped.  Unless ``variables`` is given, only t, x, c, f and
    the force symbol are sampled pointwise; every other symbol is a parameter.
    """
    if symbolic:
        e_n = expand(e) if size(e) < 20000 else e
        if e_n == ZERO:
            return Verdict(Verdict.SYMBOLIC)
    else:
        e_n = e
    domain = domain or Domain()
    constraints = [cn if isinstance(cn, Constraint) else Constraint(cn) for cn in constraints]
    syms = free_symbols(e_n) | set().union(*(cn.symbols for cn in constraints)) if constraints else free_symbols(e_n)
    variables = set(variables) if variables is not None else {s for s in syms if s in VARIABLES or s == FORCE}
    params = syms - variables
    arities = placeholders(e_n)
    if instantiations is None:
        instantiations = [{}, {}]
        for name, arity in arities.items():
            for i, inst in enumerate(default_instantiations(arity)):
                instantiations[i][name] = inst
    if not arities:
        instantiations = instantiations[:1]
    checked = 0
    worst = 0.0
    for k, funcs in enumerate(instantiations):
        for draw in range(param_draws if params - set(fixed or {}) else 1):
            rng = np.random.default_rng([seed, k, draw])
            pvals = draw_parameters(params, rng, domain, constraints, fixed)
            valid_seen = 0
            for attempt in range(4):
                pts = sample_points(sorted(variables), n_samples, rng, domain)
                values = {**pts, **pvals}
                v, m = _eval_array(e_n, values, funcs, with_magnitude=True)
                v = np.broadcast_to(np.asarray(v, dtype=float), (n_samples,))
                m = np.broadcast_to(np.asarray(m, dtype=float), (n_samples,))
                ok = np.isfinite(v) & np.isfinite(m)
                if not ok.any():
                    continue
                ratio = np.abs(v[ok]) / (tol * (1.0 + m[ok]))
                valid_seen += int(ok.sum())
                checked += int(ok.sum())
                worst = max(worst, float(ratio.max()))
                if ratio.max() > 1.0:
                    i = int(np.flatnonzero(ok)[int(np.argmax(ratio))])
                    witness = {name: float(arr[i]) for name, arr in pts.items()}
                    witness.update(pvals)
                    if funcs:
                        witness["instantiation"] = ",".join(f"{n}={fn.label}" for n, fn in sorted(funcs.items()))
                    return Verdict(Verdict.NONZERO, witness, float(v[i]), worst, checked)
                if valid_seen >= n_samples // 2:
                    break
            if valid_seen == 0:
                raise DomainError(f"all samples of {to_text(e)[:80]} landed in the singular set")
    return Verdict(Verdict.NUMERIC, max_ratio=worst, checked=checked)


from .parse import ParseError, parse  # noqa: E402  (parser depends on the constructors above)
