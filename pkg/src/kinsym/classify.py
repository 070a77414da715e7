"""Classifying equations for the symmetry algebra of the kinetic equation.

The merged equation is linear in the pair (tau, xi): every term is an
``F``-dependent coefficient times one of tau, xi or their first and second
partial derivatives.  :func:`eq27_operator` exposes that structure; the
symbolic residual and the sampled dimension estimator are both built on it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .expr import (
    FORCE,
    ZERO,
    Domain,
    Expr,
    Instantiation,
    Sym,
    _eval_array,
    add,
    as_expr,
    default_instantiations,
    depends_on,
    diff,
    expand,
    mul,
    neg,
    placeholders,
    sample_points,
    subs,
    to_text,
)
from .expr import c as C
from .expr import f as FF
from .fields import FieldError, VectorField, apply, prolong_tx, rationalize

EQ10 = "Eq10"
EQ10_PRIME = "Eq10prime"
EQ27 = "Eq27"
LIE_ON_SHELL = "LieOnShell"

JET = ("f_t", "f_x", "f_c")
F_T, F_X, F_C = (Sym(n) for n in JET)


@dataclass(frozen=True)
class Residual:
    expr: Expr
    source: str
    jet_coefficients: dict | None = field(default=None, compare=False)

    def __str__(self):
        return to_text(self.expr)


# derivative multi-indices of (tau, xi) appearing in the merged equation
_DERIVS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


def eq27_operator(F) -> dict[tuple[str, tuple[int, int]], Expr]:
    """Coefficients of the merged classifying equation.

    Keys are ``("tau"|"xi", (i, j))`` meaning the (t^i, x^j) partial derivative
    of tau or xi; the residual is the sum of coefficient times derivative.
    """
    F = as_expr(F)
    Ft, Fx, Fc, Ff = (diff(F, v) for v in ("t", "x", "c", "f"))
    fFf = mul(FF, Ff)
    cFc = mul(C, Fc)
    c2 = mul(C, C)
    return {
        ("tau", (0, 0)): Ft,
        ("xi", (0, 0)): Fx,
        ("xi", (1, 0)): Fc,
        ("xi", (0, 1)): add(cFc, mul(-2, fFf), neg(F)),
        ("tau", (1, 0)): add(neg(cFc), fFf, mul(2, F)),
        ("tau", (0, 1)): add(neg(mul(c2, Fc)), mul(3, C, fFf), mul(3, C, F)),
        ("xi", (2, 0)): as_expr(-1),
        ("xi", (1, 1)): mul(-2, C),
        ("xi", (0, 2)): neg(c2),
        ("tau", (2, 0)): C,
        ("tau", (1, 1)): mul(2, c2),
        ("tau", (0, 2)): mul(C, c2),
    }


def _partial(e: Expr, orders: tuple[int, int]) -> Expr:
    return diff(diff(e, "t", orders[0]), "x", orders[1]) if orders != (0, 0) else e


def residual_27(F, tau, xi) -> Residual:
    """Merged classifying equation, left side minus right side."""
    tau, xi = as_expr(tau), as_expr(xi)
    parts = {"tau": tau, "xi": xi}
    terms = [mul(coef, _partial(parts[which], o)) for (which, o), coef in eq27_operator(F).items()]
    return Residual(add(*terms), EQ27)


def _eq10_sides(F: Expr, X: VectorField, with_eta: bool):
    lhs = add(diff(X.alpha, "t"), mul(C, diff(X.alpha, "x")), mul(F, diff(X.alpha, "c")),
              neg(mul(F, add(diff(X.tau, "t"), mul(C, diff(X.tau, "x"))))))
    rhs = [mul(X.tau, diff(F, "t")), mul(X.xi, diff(F, "x")), mul(X.alpha, diff(F, "c"))]
    if with_eta:
        rhs.append(mul(X.eta, diff(F, "f")))
    return lhs, add(*rhs)


def residual_10(F, X: VectorField) -> Residual:
    """Force-law classifying equation for a field X, as right side minus left side.

    The orientation matches :func:`residual_27` so that the two agree
    identically on prolonged fields.
    """
    F = as_expr(F)
    lhs, rhs = _eq10_sides(F, X, with_eta=True)
    return Residual(add(rhs, neg(lhs)), EQ10)


def residual_10prime(F, X: VectorField) -> Residual:
    """Variant of :func:`residual_10` for forces free of f (no eta term)."""
    F = as_expr(F)
    if depends_on(F, "f"):
        raise ValueError("residual_10prime needs a force independent of f")
    lhs, rhs = _eq10_sides(F, X, with_eta=False)
    return Residual(add(rhs, neg(lhs)), EQ10_PRIME)


def _total(e: Expr, var: str) -> Expr:
    """Total derivative on the first jet: d/dvar + f_var d/df."""
    return add(diff(e, var), mul(Sym(f"f_{var}"), diff(e, "f")))


def lie_onshell_residual(F, X: VectorField) -> Residual:
    """Prolonged action of X on the kinetic equation, restricted to its solutions.

    The result is a polynomial in the formal jet variables ``f_x, f_c``; its
    coefficients (keyed by exponent pairs) are attached as ``jet_coefficients``.
    """
    F = as_expr(F)
    tau, xi, alpha, eta = X.tau, X.xi, X.alpha, X.eta
    jets = {"t": F_T, "x": F_X, "c": F_C}

    def eta_prolonged(var: str) -> Expr:
        # D_var eta - f_t D_var tau - f_x D_var xi - f_c D_var alpha
        return add(_total(eta, var), neg(mul(F_T, _total(tau, var))), neg(mul(F_X, _total(xi, var))),
                   neg(mul(F_C, _total(alpha, var))))

    eta_t, eta_x, eta_c = (eta_prolonged(v) for v in ("t", "x", "c"))
    XF = apply(X, F)
    Fc, Ff = diff(F, "c"), diff(F, "f")
    XFc, XFf = apply(X, Fc), apply(X, Ff)
    expr = add(
        eta_t, mul(C, eta_x), mul(alpha, F_X), mul(XF, F_C), mul(F, eta_c),
        mul(XFc, FF), mul(Fc, eta), mul(XFf, FF, F_C), mul(Ff, eta, F_C), mul(Ff, FF, eta_c),
    )
    f_t = add(neg(mul(C, F_X)), neg(mul(F, F_C)), neg(mul(Fc, FF)), neg(mul(Ff, FF, F_C)))
    expr = subs(expr, {"f_t": f_t})
    return Residual(expr, LIE_ON_SHELL, jet_coefficients(expr))


def jet_coefficients(e: Expr, max_degree: int = 2) -> dict[tuple[int, int], Expr]:
    """Taylor coefficients of ``e`` in (f_x, f_c) at the origin up to ``max_degree``."""
    out = {}
    for i in range(max_degree + 1):
        for j in range(max_degree + 1 - i):
            d = diff(diff(e, "f_x", i), "f_c", j)
            coef = subs(d, {"f_x": 0, "f_c": 0})
            scale = Fraction(1, _fact(i) * _fact(j))
            coef = expand(mul(scale, coef))
            if coef != ZERO or (i, j) == (0, 0):
                out[(i, j)] = coef
    return out


def _fact(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


# ---------------------------------------------------------------------------
# dimension estimation
# ---------------------------------------------------------------------------

class AnsatzSpace:
    """Polynomial (tau, xi) of total degree <= ``degree`` in (t, x)."""

    def __init__(self, degree: int = 3):
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        self.degree = degree
        self.monomials = [(i, d - i) for d in range(degree + 1) for i in range(d, -1, -1)]

    @property
    def dimension(self) -> int:
        return 2 * len(self.monomials)

    def columns(self):
        for which in ("tau", "xi"):
            for m in self.monomials:
                yield which, m

    def pair(self, coeffs: Sequence) -> tuple[Expr, Expr]:
        n = len(self.monomials)
        out = []
        for part in (coeffs[:n], coeffs[n:]):
            terms = [mul(as_expr(k), _mono(i, j)) for k, (i, j) in zip(part, self.monomials) if k != 0]
            out.append(add(*terms))
        return out[0], out[1]


def _mono(i: int, j: int) -> Expr:
    return mul(Sym("t") ** i if i else 1, Sym("x") ** j if j else 1)


def _mono_derivative(vals_t, vals_x, mono, orders):
    i, j = mono
    a, b = orders
    if a > i or b > j:
        return np.zeros_like(vals_t)
    ci = np.prod(range(i - a + 1, i + 1)) if a else 1
    cj = np.prod(range(j - b + 1, j + 1)) if b else 1
    return ci * cj * vals_t ** (i - a) * vals_x ** (j - b)


@dataclass
class DimensionEstimate:
    F: str
    degree: int
    dim: int
    basis: list
    condition_estimate: float
    singular_values: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "F": self.F,
            "degree": self.degree,
            "dim": self.dim,
            "basis": [{"tau": to_text(a), "xi": to_text(b)} for a, b in self.basis],
            "condition_estimate": self.condition_estimate,
        }


_CANCEL = 256 * np.finfo(float).eps


def sample_matrix(F: Expr, space: AnsatzSpace, n_samples: int, params: Mapping[str, float] | None,
                  funcs: Mapping[str, Instantiation] | None, rng: np.random.Generator,
                  domain: Domain | None = None) -> np.ndarray:
    """Rows: sample points; columns: ansatz coefficients; entries: the residual."""
    domain = domain or Domain()
    op = eq27_operator(F)
    pts = sample_points(("t", "x", "c", "f"), n_samples, rng, domain)
    values = {**pts, **(params or {})}
    coef_vals = {}
    for key, e in op.items():
        v, m = _eval_array(expand(e), values, funcs or {}, with_magnitude=True)
        v = np.array(np.broadcast_to(np.asarray(v, dtype=float), (n_samples,)))
        v[np.abs(v) <= _CANCEL * np.broadcast_to(m, (n_samples,))] = 0.0
        coef_vals[key] = v
    cols = []
    for which, mono in space.columns():
        col = np.zeros(n_samples)
        mag = np.zeros(n_samples)
        for (w, orders), cv in coef_vals.items():
            if w == which:
                term = cv * _mono_derivative(pts["t"], pts["x"], mono, orders)
                col = col + term
                mag = mag + np.abs(term)
        # exact cancellation leaves roundoff that column scaling would blow up
        col[np.abs(col) <= _CANCEL * mag] = 0.0
        cols.append(col)
    return np.column_stack(cols)


def _rref(A: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    A = A.copy()
    rows, cols = A.shape
    r = 0
    for col in range(cols):
        if r >= rows:
            break
        p = r + int(np.argmax(np.abs(A[r:, col])))
        if abs(A[p, col]) < tol:
            continue
        A[[r, p]] = A[[p, r]]
        A[r] /= A[r, col]
        for k in range(rows):
            if k != r:
                A[k] -= A[k, col] * A[r]
        r += 1
    return A[:r]


def estimate_dimension(F, space: AnsatzSpace | int = 3, n_samples: int | None = None, tol: float = 1e-8,
                       params: Mapping[str, float] | None = None,
                       funcs: Mapping[str, Instantiation] | None = None, seed: int = 0,
                       domain: Domain | None = None) -> DimensionEstimate:
    """Numeric dimension of the polynomial solutions of the merged classifying equation.

    Singular values below ``tol`` times the largest count as zero.  The
    null-space basis is brought to reduced row-echelon form and snapped to
    small-denominator rationals where possible.
    """
    F = as_expr(F)
    if not isinstance(space, AnsatzSpace):
        space = AnsatzSpace(space)
    ncols = space.dimension
    n_samples = n_samples or max(4 * ncols, 120)
    if n_samples < 3 * ncols:
        raise ValueError(f"need at least {3 * ncols} samples for {ncols} unknowns")
    if funcs is None:
        funcs = {name: default_instantiations(arity)[0] for name, arity in placeholders(F).items()}
    rng = np.random.default_rng([seed, 104729])
    rows = []
    have = 0
    for _ in range(10):
        M = sample_matrix(F, space, n_samples, params, funcs, rng, domain)
        M = M[np.isfinite(M).all(axis=1)]
        rows.append(M)
        have += M.shape[0]
        if have >= n_samples:
            break
    M = np.vstack(rows)
    if M.shape[0] < 3 * ncols:
        raise FieldError("ill-conditioned sampling: too few regular sample points")
    norms = np.linalg.norm(M, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    _, s, vt = np.linalg.svd(M / scale, full_matrices=True)
    smax = s[0] if s.size and s[0] > 0 else 1.0
    rank = int((s > tol * smax).sum())
    null = vt[rank:].T / scale[:, None]  # back to unscaled coefficients
    nz = s[s > tol * smax]
    cond = float(nz[0] / nz[-1]) if nz.size else float("inf")
    basis = []
    if null.shape[1]:
        R = _rref(null.T)
        for row in R:
            coeffs = []
            for v in row:
                r, snapped = rationalize(float(v))
                coeffs.append(r if snapped else float(v))
            basis.append(space.pair(coeffs))
    return DimensionEstimate(to_text(F), space.degree, null.shape[1], basis, cond, [float(v) for v in s])


__all__ = [
    "Residual", "residual_27", "residual_10", "residual_10prime", "lie_onshell_residual",
    "jet_coefficients", "eq27_operator", "AnsatzSpace", "estimate_dimension", "DimensionEstimate",
    "EQ10", "EQ10_PRIME", "EQ27", "LIE_ON_SHELL", "JET", "prolong_tx", "FORCE",
]
