"""Vector fields on (t, x, c, f[, Force]) space and finite-dimensional algebras of them."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .expr import (
    FORCE,
    ONE,
    ZERO,
    Domain,
    Expr,
    Instantiation,
    _eval_array,
    add,
    as_expr,
    diff,
    expand,
    free_symbols,
    mul,
    neg,
    parse,
    sample_points,
    to_text,
)
from .expr import c as C
from .expr import f as FF


class FieldError(ValueError):
    pass


BASE_COORDS = ("t", "x", "c", "f")


@dataclass(frozen=True)
class VectorField:
    """``tau d/dt + xi d/dx + alpha d/dc + eta d/df`` (+ ``phi d/dForce`` for equivalence fields)."""

    tau: Expr
    xi: Expr
    alpha: Expr
    eta: Expr
    phi: Expr | None = None
    label: str = field(default="", compare=False)

    @property
    def is_equivalence(self) -> bool:
        return self.phi is not None

    @property
    def coords(self) -> tuple[str, ...]:
        return BASE_COORDS + ((FORCE,) if self.phi is not None else ())

    @property
    def components(self) -> tuple[Expr, ...]:
        base = (self.tau, self.xi, self.alpha, self.eta)
        return base + ((self.phi,) if self.phi is not None else ())

    def __call__(self, g: Expr) -> Expr:
        """Apply the field as a derivation to a scalar expression."""
        return apply(self, g)

    def normalized(self) -> "VectorField":
        comps = [expand(e) for e in self.components]
        return VectorField(*comps[:4], comps[4] if self.phi is not None else None, label=self.label)

    def is_zero(self) -> bool:
        return all(e == ZERO for e in self.normalized().components)

    def scale(self, k) -> "VectorField":
        k = as_expr(k)
        comps = [mul(k, e) for e in self.components]
        return VectorField(*comps[:4], comps[4] if self.phi is not None else None)

    def __add__(self, other: "VectorField") -> "VectorField":
        _same_kind(self, other)
        comps = [add(a, b) for a, b in zip(self.components, other.components)]
        return VectorField(*comps[:4], comps[4] if self.phi is not None else None)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + other.scale(-1)

    def to_json(self) -> dict:
        return {"tau": to_text(self.tau), "xi": to_text(self.xi)}

    def __str__(self):
        parts = []
        for name, comp in zip(("t", "x", "c", "f", "F"), self.components):
            if comp != ZERO:
                parts.append(f"({to_text(comp)})d{name}")
        return " + ".join(parts) or "0"


def _same_kind(a: VectorField, b: VectorField):
    if a.is_equivalence != b.is_equivalence:
        raise FieldError("cannot combine a symmetry field with an equivalence field")


def _check_tx(tau: Expr, xi: Expr):
    for name, e in (("tau", tau), ("xi", xi)):
        bad = free_symbols(e) & {"c", "f", FORCE}
        if bad:
            raise FieldError(f"{name} must depend on (t, x) only, found {sorted(bad)}")


def prolong_alpha(tau: Expr, xi: Expr) -> Expr:
    # xi_t + c xi_x - c tau_t - c^2 tau_x
    return add(diff(xi, "t"), mul(C, diff(xi, "x")), neg(mul(C, diff(tau, "t"))),
               neg(mul(C, C, diff(tau, "x"))))


def prolong_eta(tau: Expr, xi: Expr) -> Expr:
    # f (3 c tau_x - 2 xi_x + tau_t)
    return mul(FF, add(mul(3, C, diff(tau, "x")), mul(-2, diff(xi, "x")), diff(tau, "t")))


def prolong_tx(tau, xi, label: str = "") -> VectorField:
    """Symmetry field induced by the plane field ``tau d/dt + xi d/dx``."""
    tau, xi = as_expr(tau), as_expr(xi)
    _check_tx(tau, xi)
    return VectorField(tau, xi, prolong_alpha(tau, xi), prolong_eta(tau, xi), label=label)


def prolong_equiv(tau, xi, F=None, label: str = "") -> VectorField:
    """Equivalence field: the symmetry prolongation plus its action on the force."""
    tau, xi = as_expr(tau), as_expr(xi)
    F = as_expr(F) if F is not None else parse(FORCE)
    _check_tx(tau, xi)
    alpha = prolong_alpha(tau, xi)
    phi = add(diff(alpha, "t"), mul(C, diff(alpha, "x")),
              mul(F, add(diff(xi, "x"), mul(-2, diff(tau, "t")), mul(-3, C, diff(tau, "x")))))
    return VectorField(tau, xi, alpha, prolong_eta(tau, xi), phi, label=label)


def apply(X: VectorField, g: Expr) -> Expr:
    terms = [mul(comp, diff(g, name)) for comp, name in zip(X.components, X.coords) if comp != ZERO]
    return add(*terms)


def lie_bracket(A: VectorField, B: VectorField) -> VectorField:
    """``[A, B]`` with components ``A(B_i) - B(A_i)``."""
    _same_kind(A, B)
    comps = [expand(add(apply(A, b), neg(apply(B, a)))) for a, b in zip(A.components, B.components)]
    return VectorField(*comps[:4], comps[4] if A.is_equivalence else None)


def is_prolonged(X: VectorField) -> bool:
    """True when alpha and eta follow from (tau, xi) by the closed-form prolongation."""
    if free_symbols(X.tau) & {"c", "f"} or free_symbols(X.xi) & {"c", "f"}:
        return False
    da = expand(add(X.alpha, neg(prolong_alpha(X.tau, X.xi))))
    de = expand(add(X.eta, neg(prolong_eta(X.tau, X.xi))))
    return da == ZERO and de == ZERO


def from_json(data: Mapping) -> VectorField:
    return prolong_tx(parse(data["tau"]), parse(data["xi"]), label=data.get("label", ""))


# ---------------------------------------------------------------------------
# sampled linear algebra
# ---------------------------------------------------------------------------

def _tx_samples(n: int, seed: int, domain: Domain | None = None) -> dict:
    rng = np.random.default_rng([seed, 7919])
    return sample_points(("t", "x"), n, rng, domain or Domain())


def _coefficient_matrix(pairs: Sequence[tuple[Expr, Expr]], values: Mapping,
                        funcs: Mapping[str, Instantiation] | None = None) -> np.ndarray:
    n = len(next(iter(values.values())))
    cols = []
    for tau, xi in pairs:
        col = []
        for e in (tau, xi):
            v = _eval_array(e, values, funcs or {})[0]
            col.append(np.broadcast_to(np.asarray(v, dtype=float), (n,)))
        cols.append(np.concatenate(col))
    return np.column_stack(cols)


def _finite_rows(*mats):
    ok = np.ones(mats[0].shape[0], dtype=bool)
    for m in mats:
        ok &= np.isfinite(m).all(axis=1)
    return ok


def numeric_rank(basis: Sequence[VectorField], params: Mapping[str, float] | None = None,
                 n_samples: int = 40, tol: float = 1e-9, seed: int = 0,
                 funcs: Mapping[str, Instantiation] | None = None) -> int:
    """Rank of the sampled (tau, xi) coefficient matrix of the basis."""
    values = {**_tx_samples(n_samples, seed), **(params or {})}
    M = _coefficient_matrix([(X.tau, X.xi) for X in basis], values, funcs)
    M = M[_finite_rows(M)]
    if M.size == 0:
        return 0
    M = M / np.maximum(np.linalg.norm(M, axis=0), 1e-300)
    s = np.linalg.svd(M, compute_uv=False)
    return int((s > tol * max(s[0], 1e-300)).sum())


def rationalize(value: float, max_denominator: int = 64, tol: float = 1e-6) -> tuple[Fraction | float, bool]:
    """Snap a float to a small-denominator rational when within ``tol``; the flag says whether it snapped."""
    fr = Fraction(value).limit_denominator(max_denominator)
    if abs(float(fr) - value) <= tol:
        return fr, True
    return float(value), False


@dataclass
class ClosureResult:
    closed: bool
    structure_constants: list | None = None  # [i][j][k]: [X_i, X_j] = sum_k C_ijk X_k
    witness: dict | None = None
    max_residual: float = 0.0
    flagged: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {"closed": self.closed, "max_residual": self.max_residual}
        if self.structure_constants is not None:
            out["structure_constants"] = [[[str(v) for v in row] for row in plane]
                                          for plane in self.structure_constants]
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def closure_check(basis: Sequence[VectorField], tol: float = 1e-9, params: Mapping[str, float] | None = None,
                  n_samples: int = 40, seed: int = 0, funcs: Mapping[str, Instantiation] | None = None,
                  domain: Domain | None = None) -> ClosureResult:
    """Decide whether the span of ``basis`` is closed under brackets.

    Every bracket's (tau, xi) part is decomposed in the basis by least squares
    on sampled points; the pair is reported as a witness when the residual
    exceeds ``tol`` relative to the bracket's size.
    """
    if not basis:
        raise FieldError("closure_check needs a nonempty basis")
    n = len(basis)
    values = {**_tx_samples(n_samples, seed, domain), **(params or {})}
    pairs = [(X.tau, X.xi) for X in basis]
    M = _coefficient_matrix(pairs, values, funcs)
    rank = np.linalg.matrix_rank(M[_finite_rows(M)], tol=None)
    if rank < n:
        raise FieldError(f"basis is linearly dependent on the sample (rank {rank} < {n}); resample")
    consts = [[[Fraction(0)] * n for _ in range(n)] for _ in range(n)]
    worst = 0.0
    flagged = []
    for i in range(n):
        for j in range(i + 1, n):
            B = lie_bracket(basis[i], basis[j])
            b = _coefficient_matrix([(B.tau, B.xi)], values, funcs)[:, 0]
            ok = _finite_rows(M) & np.isfinite(b)
            coef, *_ = np.linalg.lstsq(M[ok], b[ok], rcond=None)
            res = float(np.max(np.abs(M[ok] @ coef - b[ok]), initial=0.0))
            scale = 1.0 + float(np.max(np.abs(b[ok]), initial=0.0))
            worst = max(worst, res / scale)
            if res > tol * scale * max(1.0, float(np.abs(M[ok]).max())):
                k = int(np.argmax(np.abs(M[ok] @ coef - b[ok])))
                idx = np.flatnonzero(ok)[k] % n_samples
                witness = {"pair": [i, j], "bracket": B.to_json(), "residual": res,
                           "t": float(values["t"][idx]), "x": float(values["x"][idx])}
                return ClosureResult(False, witness=witness, max_residual=worst)
            for k, v in enumerate(coef):
                r, snapped = rationalize(float(v))
                if not snapped:
                    flagged.append((i, j, k))
                consts[i][j][k] = r
                consts[j][i][k] = -r if isinstance(r, Fraction) else -float(r)
    return ClosureResult(True, consts, max_residual=worst, flagged=flagged)


class Algebra:
    """A finite basis of prolonged fields with lazily computed structure constants."""

    def __init__(self, basis: Sequence[VectorField], params: Mapping[str, float] | None = None,
                 funcs: Mapping[str, Instantiation] | None = None, tol: float = 1e-9):
        self.basis = list(basis)
        self.params = dict(params or {})
        self.funcs = funcs
        self.tol = tol
        self._closure: ClosureResult | None = None

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple], **kw) -> "Algebra":
        return cls([prolong_tx(as_expr(a), as_expr(b)) for a, b in pairs], **kw)

    def __len__(self):
        return len(self.basis)

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def is_independent(self) -> bool:
        return numeric_rank(self.basis, self.params, tol=self.tol, funcs=self.funcs) == len(self.basis)

    def closure(self) -> ClosureResult:
        if self._closure is None:
            self._closure = closure_check(self.basis, self.tol, self.params, funcs=self.funcs)
        return self._closure

    @property
    def structure_constants(self):
        res = self.closure()
        if not res.closed:
            raise FieldError(f"basis is not closed: {res.witness}")
        return res.structure_constants


# handy coordinate fields
D_T = prolong_tx(ONE, ZERO, "d/dt")
D_X = prolong_tx(ZERO, ONE, "d/dx")
__all__ = [
    "VectorField", "FieldError", "prolong_tx", "prolong_equiv", "apply", "lie_bracket",
    "closure_check", "ClosureResult", "Algebra", "numeric_rank", "rationalize", "is_prolonged",
    "from_json", "D_T", "D_X",
]
