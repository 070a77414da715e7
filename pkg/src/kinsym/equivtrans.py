"""Finite equivalence transformations of the kinetic equation.

A change of the plane variables ``tbar = phi(t, x)``, ``xbar = psi(t, x)``
induces an action on the velocity, the density and the force::

    D     = phi_t + c phi_x
    J     = psi_x phi_t - phi_x psi_t
    cbar  = (psi_t + c psi_x) / D
    fbar  = f D^3 / J^2
    Fbar  = F J / D^3 + (cbar_t + c cbar_x) / D

All three formulas are in the old variables.  To express ``Fbar`` in the new
variables the map must be inverted; the named catalog maps carry explicit
inverses, other maps are handled in verification mode, which checks a
candidate ``Fbar(tbar, xbar, cbar, fbar)`` against the right-hand side at
sample points instead.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .expr import (
    FORCE,
    ZERO,
    Constraint,
    Domain,
    DomainError,
    Expr,
    Instantiation,
    Sym,
    Verdict,
    _eval_array,
    add,
    as_expr,
    default_instantiations,
    diff,
    draw_parameters,
    expand,
    free_symbols,
    is_zero,
    mul,
    neg,
    parse,
    placeholders,
    power,
    sample_points,
    size,
    subs,
    to_text,
)
from .expr import c as C
from .expr import f as FF
from .fields import VectorField, apply, prolong_equiv, prolong_tx

SINGULAR_EPS = 1e-12


class SingularPointError(ArithmeticError):
    pass


class InverseUnavailable(LookupError):
    pass


@dataclass(frozen=True)
class Diffeo2:
    """Plane change of variables with optional explicit inverse and catalog metadata."""

    phi: Expr
    psi: Expr
    name: str = ""
    inverse: tuple[Expr, Expr] | None = None
    domain: Mapping = field(default_factory=dict, compare=False)
    expected: Mapping = field(default_factory=dict, compare=False)
    params: tuple[str, ...] = field(default=(), compare=False)
    constraints: tuple[str, ...] = field(default=(), compare=False)
    funcs: tuple[str, ...] = field(default=(), compare=False)
    note: str = field(default="", compare=False)

    def __post_init__(self):
        for e in (self.phi, self.psi):
            bad = free_symbols(e) & {"c", "f", FORCE}
            if bad:
                raise ValueError(f"map components must depend on (t, x) only, found {sorted(bad)}")
        if self.jacobian() == ZERO:
            raise ValueError("Jacobian vanishes identically")

    # induced formulas in old variables ------------------------------------
    def D(self) -> Expr:
        return add(diff(self.phi, "t"), mul(C, diff(self.phi, "x")))

    def jacobian(self) -> Expr:
        return add(mul(diff(self.psi, "x"), diff(self.phi, "t")), neg(mul(diff(self.phi, "x"), diff(self.psi, "t"))))

    def cbar(self) -> Expr:
        return mul(add(diff(self.psi, "t"), mul(C, diff(self.psi, "x"))), power(self.D(), as_expr(-1)))

    def fbar(self) -> Expr:
        return mul(FF, power(self.D(), as_expr(3)), power(self.jacobian(), as_expr(-2)))

    def Fbar(self, F: Expr | str | None = None) -> Expr:
        """Transformed force value in the old variables (``F`` defaults to the symbol ``Force``)."""
        F = Sym(FORCE) if F is None else as_expr(F)
        cb = self.cbar()
        D = self.D()
        return add(mul(F, self.jacobian(), power(D, as_expr(-3))),
                   mul(add(diff(cb, "t"), mul(C, diff(cb, "x"))), power(D, as_expr(-1))))

    def with_params(self, params: Mapping) -> "Diffeo2":
        p = {k: as_expr(v) for k, v in params.items()}
        inv = (subs(self.inverse[0], p), subs(self.inverse[1], p)) if self.inverse else None
        exp_ = {k: to_text(subs(parse(v), p)) for k, v in self.expected.items()}
        return Diffeo2(subs(self.phi, p), subs(self.psi, p), self.name, inv, self.domain, exp_,
                       tuple(n for n in self.params if n not in p), self.constraints, self.funcs, self.note)

    def to_json(self) -> dict:
        out = {"name": self.name, "phi": to_text(self.phi), "psi": to_text(self.psi)}
        if self.inverse:
            out["inverse"] = {"t": to_text(self.inverse[0]), "x": to_text(self.inverse[1])}
        return out


def identity() -> Diffeo2:
    return Diffeo2(Sym("t"), Sym("x"), "identity", (Sym("t"), Sym("x")))


def diffeo(phi, psi, name: str = "", inverse=None) -> Diffeo2:
    inv = (as_expr(inverse[0]), as_expr(inverse[1])) if inverse else None
    return Diffeo2(as_expr(phi), as_expr(psi), name, inv)


# ---------------------------------------------------------------------------
# catalog of named maps
# ---------------------------------------------------------------------------

def _load_maps() -> dict[str, dict]:
    text = resources.files("kinsym").joinpath("data/maps.json").read_text(encoding="utf-8")
    return {m["name"]: m for m in json.loads(text)["maps"]}


_MAPS: dict[str, dict] | None = None


def map_names() -> list[str]:
    global _MAPS
    if _MAPS is None:
        _MAPS = _load_maps()
    return list(_MAPS)


def map_spec(name: str) -> dict:
    map_names()
    try:
        return _MAPS[name]
    except KeyError:
        raise KeyError(f"unknown catalog map {name!r}; known: {', '.join(_MAPS)}") from None


def catalog_map(name: str, params: Mapping | None = None, symbolic: bool = False) -> Diffeo2:
    """Named map from the catalog.

    Every declared parameter must be supplied unless ``symbolic`` is set, in
    which case missing parameters stay as symbols.
    """
    spec = map_spec(name)
    params = dict(params or {})
    missing = [p for p in spec["params"] if p not in params]
    if missing and not symbolic:
        raise KeyError(f"map {name!r} needs parameters {missing}")
    inv = spec.get("inverse")
    d = Diffeo2(
        parse(spec["phi"]), parse(spec["psi"]), name,
        (parse(inv["t"]), parse(inv["x"])) if inv else None,
        spec.get("domain", {}), dict(spec["expected"]), tuple(spec["params"]),
        tuple(spec.get("constraints", ())), tuple(spec.get("funcs", ())), spec.get("note", ""),
    )
    unknown = set(params) - set(spec["params"])
    if unknown:
        raise KeyError(f"map {name!r} has no parameters {sorted(unknown)}")
    return d.with_params(params) if params else d


# ---------------------------------------------------------------------------
# numeric action
# ---------------------------------------------------------------------------

def transform_point(d: Diffeo2, t: float, x: float, c: float, f: float,
                    params: Mapping[str, float] | None = None,
                    funcs: Mapping[str, Instantiation] | None = None) -> tuple[float, float, float, float]:
    values = {"t": t, "x": x, "c": c, "f": f, **(params or {})}
    funcs = funcs or {}

    def ev(e):
        return float(_eval_array(e, values, funcs)[0])

    D, J = ev(d.D()), ev(d.jacobian())
    if not (abs(D) >= SINGULAR_EPS and abs(J) >= SINGULAR_EPS):
        raise SingularPointError(f"map {d.name or '?'} is singular at {(t, x, c, f)} (D={D}, J={J})")
    out = (ev(d.phi), ev(d.psi), ev(d.cbar()), ev(d.fbar()))
    if not all(math.isfinite(v) for v in out):
        raise SingularPointError(f"map {d.name or '?'} is undefined at {(t, x, c, f)}")
    return out


def inverse_point_exprs(d: Diffeo2) -> dict[str, Expr]:
    """Old (t, x, c, f) as expressions in the new variables, written with the same names."""
    if d.inverse is None:
        raise InverseUnavailable(f"map {d.name or '?'} has no explicit inverse")
    tn, xn, cn, fn = (Sym(n) for n in ("_tn", "_xn", "_cn", "_fn"))
    t_old = subs(d.inverse[0], {"t": tn, "x": xn})
    x_old = subs(d.inverse[1], {"t": tn, "x": xn})
    at_old = {"t": t_old, "x": x_old}
    phi_t, phi_x = subs(diff(d.phi, "t"), at_old), subs(diff(d.phi, "x"), at_old)
    psi_t, psi_x = subs(diff(d.psi, "t"), at_old), subs(diff(d.psi, "x"), at_old)
    # invert cbar = (psi_t + c psi_x)/(phi_t + c phi_x) for c
    c_old = mul(add(mul(phi_t, cn), neg(psi_t)), power(add(psi_x, neg(mul(phi_x, cn))), as_expr(-1)))
    D_old = add(phi_t, mul(c_old, phi_x))
    J_old = add(mul(psi_x, phi_t), neg(mul(phi_x, psi_t)))
    f_old = mul(fn, power(J_old, as_expr(2)), power(D_old, as_expr(-3)))
    rename = {"_tn": Sym("t"), "_xn": Sym("x"), "_cn": Sym("c"), "_fn": Sym("f")}
    return {k: subs(v, rename) for k, v in (("t", t_old), ("x", x_old), ("c", c_old), ("f", f_old))}


@dataclass
class ImplicitForce:
    """Verification-mode result: the transformed force known only through the old variables."""

    d: Diffeo2
    F: Expr
    rhs: Expr

    def check(self, candidate, params: Mapping[str, float] | None = None, **kw) -> Verdict:
        """Does ``candidate(tbar, xbar, cbar, fbar)`` equal the transformed force?"""
        return verify_transformed_force(self.d, self.F, as_expr(candidate), fixed=params, **kw)


def transform_force(d: Diffeo2, F, verify: bool = False):
    """The transformed force as an expression in the new variables.

    Uses the map's explicit inverse.  Without one, ``verify=True`` returns an
    :class:`ImplicitForce` for checking candidates; otherwise
    :class:`InverseUnavailable` is raised.
    """
    F = as_expr(F)
    rhs = d.Fbar(F)
    if d.inverse is None:
        if verify:
            return ImplicitForce(d, F, rhs)
        raise InverseUnavailable(f"map {d.name or '?'} has no explicit inverse; request verification mode")
    out = subs(rhs, inverse_point_exprs(d))
    expanded = expand(out)
    return expanded if size(expanded) <= size(out) else out


def pull_back_candidate(d: Diffeo2, candidate: Expr) -> Expr:
    """``candidate(phi, psi, cbar, fbar)``: a new-variable expression written in old variables."""
    return subs(candidate, {"t": d.phi, "x": d.psi, "c": d.cbar(), "f": d.fbar()})


def verify_transformed_force(d: Diffeo2, F: Expr, candidate: Expr, domain: Domain | None = None,
                             **kw) -> Verdict:
    diff_expr = add(pull_back_candidate(d, candidate), neg(d.Fbar(F)))
    return is_zero(diff_expr, domain=domain or map_domain(d), symbolic=False,
                   constraints=list(d.constraints) + list(kw.pop("constraints", ())), **kw)


def map_domain(d: Diffeo2, extra: Mapping | None = None) -> Domain:
    boxes = dict(d.domain or {})
    boxes.update(extra or {})
    return Domain(boxes)


def map_instantiations(d: Diffeo2, arity_of: Mapping[str, int] | None = None) -> list[dict] | None:
    """Placeholder instantiations declared by the catalog entry (monotone ones for general maps)."""
    if not d.funcs:
        return None
    return [{"G": Instantiation.from_text(f"G={txt}", txt)} for txt in d.funcs]


# ---------------------------------------------------------------------------
# fields and composition
# ---------------------------------------------------------------------------

def pushforward_field(d: Diffeo2, X: VectorField) -> VectorField:
    """Image of a prolonged field, re-prolonged in the new variables."""
    inv = inverse_point_exprs(d)
    at = {"t": inv["t"], "x": inv["x"]}
    tau = subs(apply(X, d.phi), at)
    xi = subs(apply(X, d.psi), at)
    return prolong_tx(tau, xi, label=X.label)


def compose(d2: Diffeo2, d1: Diffeo2) -> Diffeo2:
    """``d2 after d1``."""
    inner = {"t": d1.phi, "x": d1.psi}
    inv = None
    if d1.inverse and d2.inverse:
        outer = {"t": d2.inverse[0], "x": d2.inverse[1]}
        inv = (subs(d1.inverse[0], outer), subs(d1.inverse[1], outer))
    name = f"{d2.name or '?'}*{d1.name or '?'}"
    domain = {**dict(d2.domain or {}), **dict(d1.domain or {})}
    return Diffeo2(subs(d2.phi, inner), subs(d2.psi, inner), name, inv, domain,
                   constraints=tuple(d1.constraints) + tuple(d2.constraints))


def one_parameter(tau, xi, eps: float) -> Diffeo2:
    """First-order family ``tbar = t + eps tau``, ``xbar = x + eps xi``."""
    tau, xi = as_expr(tau), as_expr(xi)
    return Diffeo2(add(Sym("t"), mul(as_expr(eps), tau)), add(Sym("x"), mul(as_expr(eps), xi)), f"flow({eps})")


def infinitesimal_defect(tau, xi, F=None, h: float = 1e-5, n_samples: int = 50, seed: int = 0,
                         params: Mapping[str, float] | None = None) -> float:
    """Max relative gap between d/deps of the transformed force and the equivalence generator."""
    F = Sym(FORCE) if F is None else as_expr(F)
    plus = one_parameter(tau, xi, h).Fbar(F)
    minus = one_parameter(tau, xi, -h).Fbar(F)
    gen = prolong_equiv(tau, xi, F).phi
    rng = np.random.default_rng([seed, 31])
    dom = Domain()
    vals = {**sample_points(("t", "x", "c", "f", FORCE), n_samples, rng, dom), **(params or {})}
    fd = (_eval_array(plus, vals, {})[0] - _eval_array(minus, vals, {})[0]) / (2 * h)
    ex = np.broadcast_to(_eval_array(gen, vals, {})[0], (n_samples,))
    return float(np.max(np.abs(fd - ex) / (1 + np.abs(ex))))


# ---------------------------------------------------------------------------
# catalog checks
# ---------------------------------------------------------------------------

@dataclass
class MapCheck:
    name: str
    results: dict
    fitted: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v["verdict"] != Verdict.NONZERO for v in self.results.values())

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "results": self.results}


def check_catalog_map(name: str, tol: float = 1e-9, n_samples: int = 100, param_draws: int = 3,
                      seed: int = 0, use_corrected: bool = False) -> MapCheck:
    """Compare the induced c, f and force formulas with the catalog's printed ones."""
    d = catalog_map(name, symbolic=True)
    dom = map_domain(d)
    insts = map_instantiations(d)
    computed = {"cbar": d.cbar(), "fbar": d.fbar(), "Fbar": d.Fbar()}
    expected = dict(d.expected)
    if use_corrected:
        expected.update(map_spec(name).get("corrected", {}))
    results = {}
    for key, e in computed.items():
        printed = parse(expected[key])
        v = is_zero(add(e, neg(printed)), domain=dom, n_samples=n_samples, tol=tol, param_draws=param_draws,
                    instantiations=insts, constraints=d.constraints, seed=seed, symbolic=False)
        results[key] = v.to_json()
    if d.inverse is not None:
        # the inverse must undo the map on (t, x)
        back_t = subs(d.inverse[0], {"t": d.phi, "x": d.psi})
        back_x = subs(d.inverse[1], {"t": d.phi, "x": d.psi})
        for key, e, target in (("inverse_t", back_t, "t"), ("inverse_x", back_x, "x")):
            v = is_zero(add(e, neg(Sym(target))), domain=dom, n_samples=n_samples, tol=tol,
                        param_draws=param_draws, instantiations=insts, constraints=d.constraints,
                        seed=seed, symbolic=False)
            results[key] = v.to_json()
    return MapCheck(name, results)


def group_law_defect(d2: Diffeo2, d1: Diffeo2, F=None, n_samples: int = 50, seed: int = 0,
                     params: Mapping[str, float] | None = None,
                     funcs: Mapping[str, Instantiation] | None = None, domain: Domain | None = None) -> float:
    """Max relative difference between transforming by ``d2 after d1`` and transforming twice."""
    F = Sym(FORCE) if F is None else as_expr(F)
    comp = compose(d2, d1)
    rng = np.random.default_rng([seed, 97])
    dom = domain or Domain({**dict(d2.domain or {}), **dict(d1.domain or {})})
    pts = sample_points(("t", "x", "c", "f", FORCE), n_samples, rng, dom)
    vals = {**pts, **(params or {})}
    funcs = funcs or {}
    ev = lambda e, v: np.broadcast_to(np.asarray(_eval_array(e, v, funcs)[0], dtype=float), (n_samples,))
    # once through d1, then d2 at the image point with the image force value
    mid = {"t": ev(d1.phi, vals), "x": ev(d1.psi, vals), "c": ev(d1.cbar(), vals), "f": ev(d1.fbar(), vals),
           FORCE: ev(d1.Fbar(), vals), **(params or {})}
    two = [ev(e, mid) for e in (d2.phi, d2.psi, d2.cbar(), d2.fbar(), d2.Fbar())]
    one = [ev(e, vals) for e in (comp.phi, comp.psi, comp.cbar(), comp.fbar(), comp.Fbar())]
    worst = 0.0
    for a, b in zip(one, two):
        ok = np.isfinite(a) & np.isfinite(b)
        if ok.any():
            worst = max(worst, float(np.max(np.abs(a[ok] - b[ok]) / (1 + np.abs(b[ok])))))
    return worst


__all__ = [
    "Diffeo2", "identity", "diffeo", "catalog_map", "map_names", "map_spec", "transform_point",
    "transform_force", "ImplicitForce", "pushforward_field", "compose", "one_parameter",
    "infinitesimal_defect", "check_catalog_map", "group_law_defect", "verify_transformed_force",
    "pull_back_candidate", "inverse_point_exprs", "SingularPointError", "InverseUnavailable",
    "MapCheck", "map_domain", "map_instantiations",
]
