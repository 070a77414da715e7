"""Text grammar for expressions.

::

    expr    := sum
    sum     := product (('+' | '-') product)*
    product := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom (('^' | '**') unary)?
    atom    := number | name | name primes? '(' args ')' | '(' expr ')'
    primes  := "'"+ | "'" '[' int (',' int)* ']'

An optional first line ``funcs: G, Phi`` declares the placeholder functions;
``G``, ``Phi`` and ``Psi`` are always available.
"""
from __future__ import annotations

import re
from fractions import Fraction

from .expr import (
    FUNCTIONS,
    Apply,
    Const,
    Expr,
    Sym,
    add,
    func,
    mul,
    neg,
    power,
)

DEFAULT_PLACEHOLDERS = ("G", "Phi", "Psi")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+)
  | (?P<name>[^\W\d]\w*)
  | (?P<pow>\*\*|\^)
  | (?P<op>[-+*/(),\[\]'])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    """Syntax or symbol-category error; ``offset`` is a UTF-8 byte offset into the input."""

    def __init__(self, message: str, text: str, pos: int):
        self.offset = len(text[:pos].encode("utf-8"))
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at byte {self.offset}")


def _tokenize(text: str, base: int):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), base + pos))
        pos = m.end()
    out.append(("end", "", base + len(text)))
    return out


class _Parser:
    def __init__(self, text: str, body_start: int, placeholders: set[str]):
        self.text = text
        self.toks = _tokenize(text[body_start:], body_start)
        self.i = 0
        self.placeholders = placeholders

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.next()
        if tok[1] != value:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {value!r}, found {what}", self.text, tok[2])
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, self.text, tok[2])

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise self.error("empty expression")
        e = self.sum()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected {tok[1]!r}")
        return e

    def sum(self) -> Expr:
        terms = [self.product()]
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.product()
            terms.append(rhs if op == "+" else neg(rhs))
        return add(*terms) if len(terms) > 1 else terms[0]

    def product(self) -> Expr:
        acc = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            rhs = self.unary()
            acc = mul(acc, rhs) if op == "*" else mul(acc, power(rhs, Const(-1)))
        return acc

    def unary(self) -> Expr:
        tok = self.peek()
        if tok[1] == "-":
            self.next()
            return neg(self.unary())
        if tok[1] == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "pow":
            tok = self.next()
            ex = self.unary()
            try:
                return power(base, ex)
            except ZeroDivisionError:
                raise self.error("zero raised to a negative power", tok) from None
        return base

    def args(self) -> list[Expr]:
        self.expect("(")
        out = [self.sum()]
        while self.peek()[1] == ",":
            self.next()
            out.append(self.sum())
        self.expect(")")
        return out

    def orders(self, arity_hint: int | None) -> tuple[int, ...] | int:
        # called after the first prime
        if self.peek()[1] == "[":
            self.next()
            idx = []
            while True:
                tok = self.next()
                if tok[0] != "num" or not tok[1].isdigit():
                    raise self.error("expected a derivative order", tok)
                idx.append(int(tok[1]))
                if self.peek()[1] == ",":
                    self.next()
                    continue
                self.expect("]")
                return tuple(idx)
        n = 1
        while self.peek()[1] == "'":
            self.next()
            n += 1
        return n

    def atom(self) -> Expr:
        tok = self.next()
        kind, val, pos = tok
        if kind == "num":
            return Const(Fraction(val))
        if val == "(":
            e = self.sum()
            self.expect(")")
            return e
        if kind != "name":
            what = "end of input" if kind == "end" else repr(val)
            raise self.error(f"unexpected {what}", tok)
        nxt = self.peek()[1]
        if val in self.placeholders:
            orders = None
            if nxt == "'":
                self.next()
                orders = self.orders(None)
            if self.peek()[1] != "(":
                raise self.error(f"placeholder {val!r} must be applied to arguments", tok)
            arguments = self.args()
            if isinstance(orders, int):
                if len(arguments) != 1:
                    raise self.error(f"use {val}'[i,j](...) for derivatives of multi-argument placeholders", tok)
                orders = (orders,)
            if orders is not None and len(orders) != len(arguments):
                raise self.error("derivative index does not match the number of arguments", tok)
            return Apply(val, tuple(arguments), orders)
        if nxt == "(":
            if val not in FUNCTIONS and val != "sqrt":
                raise self.error(f"unknown function {val!r}", tok)
            arguments = self.args()
            if len(arguments) != 1:
                raise self.error(f"{val} takes one argument", tok)
            return func(val, arguments[0])
        if val in FUNCTIONS or val == "sqrt":
            raise self.error(f"function {val!r} used as a symbol", tok)
        if nxt == "'":
            raise self.error(f"{val!r} is not a declared placeholder function", tok)
        return Sym(val)


def parse(text: str, placeholders: tuple[str, ...] | None = None) -> Expr:
    """Parse expression text; see the module docstring for the grammar."""
    if not isinstance(text, str):
        raise TypeError("parse expects a string")
    declared = set(DEFAULT_PLACEHOLDERS if placeholders is None else placeholders)
    body = 0
    m = re.match(r"\s*funcs\s*:([^\n]*)\n?", text)
    if m:
        names = [n.strip() for n in m.group(1).split(",") if n.strip()]
        for n in names:
            if not re.fullmatch(r"[^\W\d]\w*", n) or n in FUNCTIONS:
                raise ParseError(f"bad placeholder name {n!r}", text, m.start(1))
        declared.update(names)
        body = m.end()
    return _Parser(text, body, declared).parse()
