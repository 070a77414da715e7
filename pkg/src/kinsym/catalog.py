"""Machine-readable classification tables and the verification driver.

Each table lives in ``data/table<N>.json``.  A canonical entry carries a
force law and a basis of its symmetry algebra; an auxiliary entry carries a
change of variables that brings its force law to a target entry.  The driver
checks, per entry:

* every basis generator annihilates the classifying residual;
* the basis is linearly independent and closed under brackets;
* the measured polynomial-ansatz dimension is at least the basis size;
* reductions land on the target family after aligning its parameters.
"""
from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .classify import estimate_dimension, residual_10prime, residual_27
from .equivtrans import Diffeo2, catalog_map, pull_back_candidate
from .expr import (
    FORCE,
    VARIABLES,
    Constraint,
    Domain,
    DomainError,
    Expr,
    Instantiation,
    Verdict,
    _eval_array,
    add,
    default_instantiations,
    depends_on,
    draw_parameters,
    free_symbols,
    is_zero,
    neg,
    parse,
    placeholders,
    sample_points,
    subs,
    substitute_function,
    to_text,
)
from .fields import FieldError, closure_check, numeric_rank, prolong_tx

TABLE_IDS = (1, 2, 3, 4, 5)
KINDS = ("canonical", "auxiliary")


class CatalogError(ValueError):
    """Schema violation; the message names the offending row."""


@dataclass
class Reduction:
    map_name: str | None
    map_params: dict
    phi: str | None
    psi: str | None
    target: str
    target_F: str | None
    tie: dict
    fit: dict
    placeholder: dict
    alternatives: list
    domain: dict

    def diffeo(self, values: Mapping[str, float] | None = None) -> Diffeo2:
        values = values or {}
        if self.map_name:
            params = {k: subs(parse(v), values) for k, v in self.map_params.items()}
            return catalog_map(self.map_name, params)
        return Diffeo2(subs(parse(self.phi), values), subs(parse(self.psi), values), "raw")


@dataclass
class CatalogEntry:
    id: str
    table_id: int
    class_id: str
    kind: str
    F: Expr
    text: str
    constraints: list[str] = field(default_factory=list)
    basis: list[tuple[Expr, Expr]] | None = None
    reduction: Reduction | None = None
    exclusions: list[dict] = field(default_factory=list)
    domain: dict = field(default_factory=dict)
    instantiations: list[dict] | None = None
    dimension_params: dict | None = None
    note: str = ""

    @property
    def parameters(self) -> set[str]:
        return {s for s in free_symbols(self.F) if s not in VARIABLES}

    @property
    def expected_dimension(self) -> int | None:
        return len(self.basis) if self.basis is not None else None

    @property
    def f_free(self) -> bool:
        return not depends_on(self.F, "f")

    def sampling_domain(self, extra: Mapping | None = None) -> Domain:
        return Domain({**self.domain, **(extra or {})})

    def funcs(self) -> list[dict[str, Instantiation]]:
        """Placeholder instantiation sets for this entry (default pair unless overridden)."""
        arities = placeholders(self.F)
        if self.instantiations:
            out = []
            for k, spec in enumerate(self.instantiations):
                out.append({name: Instantiation.from_text(f"{name}={txt}", txt, arities.get(name, 1))
                            for name, txt in spec.items()})
            return out
        sets: list[dict] = [{}, {}]
        for name, arity in arities.items():
            for k, inst in enumerate(default_instantiations(arity)):
                sets[k][name] = inst
        return sets if arities else [{}]


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _require(row: dict, key: str, where: str):
    if key not in row:
        raise CatalogError(f"{where}: missing field {key!r}")
    return row[key]


def _parse_row_expr(text, where: str, what: str) -> Expr:
    try:
        return parse(text)
    except Exception as exc:  # ParseError or TypeError
        raise CatalogError(f"{where}: cannot parse {what} {text!r}: {exc}") from None


def _entry_from_row(row: dict, table_id: int, where: str) -> CatalogEntry:
    if not isinstance(row, dict):
        raise CatalogError(f"{where}: row must be an object")
    eid = _require(row, "id", where)
    where = f"{where} ({eid})"
    kind = _require(row, "kind", where)
    if kind not in KINDS:
        raise CatalogError(f"{where}: kind must be one of {KINDS}, got {kind!r}")
    text = _require(row, "F", where)
    F = _parse_row_expr(text, where, "F")
    basis = None
    if kind == "canonical":
        raw = _require(row, "basis", where)
        if not isinstance(raw, list) or not raw:
            raise CatalogError(f"{where}: canonical entries need a nonempty basis")
        basis = []
        for k, pair in enumerate(raw):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise CatalogError(f"{where}: basis element {k} must be a [tau, xi] pair")
            basis.append((_parse_row_expr(pair[0], where, "tau"), _parse_row_expr(pair[1], where, "xi")))
    reduction = None
    if kind == "auxiliary":
        red = _require(row, "reduction", where)
        if "map" not in red and not ("phi" in red and "psi" in red):
            raise CatalogError(f"{where}: reduction needs a catalog map name or phi/psi")
        if "target" not in red:
            raise CatalogError(f"{where}: reduction needs a target entry")
        reduction = Reduction(
            red.get("map"), dict(red.get("map_params", {})), red.get("phi"), red.get("psi"),
            red["target"], red.get("target_F"), dict(red.get("tie", {})), dict(red.get("fit", {})),
            dict(red.get("placeholder", {})), list(red.get("alternatives", [])), dict(red.get("domain", {})),
        )
    for cn in row.get("constraints", []):
        try:
            Constraint(cn)
        except Exception as exc:
            raise CatalogError(f"{where}: bad constraint {cn!r}: {exc}") from None
    return CatalogEntry(
        id=eid, table_id=table_id, class_id=_require(row, "class", where), kind=kind, F=F, text=text,
        constraints=list(row.get("constraints", [])), basis=basis, reduction=reduction,
        exclusions=list(row.get("exclusions", [])), domain=dict(row.get("domain", {})),
        instantiations=row.get("instantiations"), dimension_params=row.get("dimension_params"),
        note=row.get("note", ""),
    )


def load_table(path) -> list[CatalogEntry]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise CatalogError(f"{path}: empty catalog file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: invalid JSON: {exc}") from None
    return entries_from_data(data, str(path))


def entries_from_data(data: dict, source: str = "<data>") -> list[CatalogEntry]:
    if not isinstance(data, dict) or "table" not in data or "entries" not in data:
        raise CatalogError(f"{source}: expected an object with 'table' and 'entries'")
    rows = data["entries"]
    if not rows:
        raise CatalogError(f"{source}: table has no entries")
    table_id = data["table"]
    out = [_entry_from_row(row, table_id, f"{source} row {i}") for i, row in enumerate(rows)]
    ids = [e.id for e in out]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise CatalogError(f"{source}: duplicate ids {sorted(dup)}")
    return out


def _data_dir():
    return resources.files("kinsym").joinpath("data")


def load_catalog(path=None, tables: Iterable[int] = TABLE_IDS) -> list[CatalogEntry]:
    """Load the shipped tables (or a single file / directory at ``path``)."""
    if path is not None:
        p = Path(path)
        if p.is_dir():
            files = sorted(p.glob("table*.json"))
            if not files:
                raise CatalogError(f"{p}: no table files")
            entries = [e for fp in files for e in load_table(fp)]
        else:
            entries = load_table(p)
    else:
        entries = []
        for t in tables:
            entries.extend(load_table(_data_dir().joinpath(f"table{t}.json")))
    _check_targets(entries)
    return entries


def _check_targets(entries: Sequence[CatalogEntry]):
    ids = {e.id for e in entries}
    for e in entries:
        if e.reduction and e.reduction.target not in ids and e.reduction.target_F is None:
            raise CatalogError(f"{e.id}: reduction target {e.reduction.target!r} not in catalog")


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class VerifyConfig:
    tol: float = 1e-9
    samples: int = 100
    param_draws: int = 3
    instantiations: int = 2
    seed: int = 0
    degree: int = 3
    check_dimension: bool = True
    check_closure: bool = True

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _entry_seed(cfg: VerifyConfig, eid: str) -> int:
    # stable across processes, unlike hash()
    return (cfg.seed * 1_000_003 + sum((i + 1) * ord(ch) for i, ch in enumerate(eid))) % (2**31)


def _residual(entry: CatalogEntry, tau: Expr, xi: Expr) -> Expr:
    if entry.table_id == 1 and entry.f_free:
        return residual_10prime(entry.F, prolong_tx(tau, xi)).expr
    return residual_27(entry.F, tau, xi).expr


def check_generators(entry: CatalogEntry, cfg: VerifyConfig, basis=None) -> list[dict]:
    out = []
    funcs = entry.funcs()[: cfg.instantiations]
    for k, (tau, xi) in enumerate(basis or entry.basis):
        r = _residual(entry, tau, xi)
        try:
            v = is_zero(r, domain=entry.sampling_domain(), n_samples=cfg.samples, tol=cfg.tol,
                        param_draws=cfg.param_draws, instantiations=funcs, constraints=entry.constraints,
                        seed=_entry_seed(cfg, entry.id) + k)
            res = {"generator": k + 1, "tau": to_text(tau), "xi": to_text(xi), **v.to_json(),
                   "passed": v.is_zero}
        except DomainError as exc:
            res = {"generator": k + 1, "tau": to_text(tau), "xi": to_text(xi), "verdict": "Error",
                   "error": str(exc), "passed": False}
        out.append(res)
    return out


def check_closure(entry: CatalogEntry, cfg: VerifyConfig, basis=None) -> dict:
    basis = basis or entry.basis
    fields_ = [prolong_tx(a, b) for a, b in basis]
    rng = np.random.default_rng([_entry_seed(cfg, entry.id), 5])
    dom = entry.sampling_domain()
    names = set().union(*(free_symbols(a) | free_symbols(b) for a, b in basis)) - set(VARIABLES)
    names |= set().union(*(Constraint(cn).symbols for cn in entry.constraints)) if entry.constraints else set()
    results = []
    for draw in range(cfg.param_draws):
        params = draw_parameters(names, rng, dom, [Constraint(cn) for cn in entry.constraints])
        rank = numeric_rank(fields_, params, seed=draw)
        if rank < len(fields_):
            return {"passed": False, "reason": f"basis dependent (rank {rank} < {len(fields_)})",
                    "witness": {"params": params}}
        try:
            res = closure_check(fields_, cfg.tol, params, seed=draw)
        except FieldError as exc:
            return {"passed": False, "reason": str(exc), "witness": {"params": params}}
        if not res.closed:
            return {"passed": False, "reason": "bracket outside span", "witness": {**res.witness, "params": params}}
        results.append(res)
    return {"passed": True, "max_residual": max(r.max_residual for r in results),
            "structure_constants": results[0].to_json().get("structure_constants")}


def check_dimension(entry: CatalogEntry, cfg: VerifyConfig) -> dict:
    rng = np.random.default_rng([_entry_seed(cfg, entry.id), 11])
    dom = entry.sampling_domain()
    params = dict(entry.dimension_params or {})
    params = draw_parameters(entry.parameters | {p for cn in entry.constraints for p in Constraint(cn).symbols},
                             rng, dom, [Constraint(cn) for cn in entry.constraints], fixed=params)
    # every instantiation must reach the expected dimension; the smallest is the generic one
    ests = [estimate_dimension(entry.F, cfg.degree, params=params, funcs=funcs, seed=cfg.seed, domain=dom)
            for funcs in entry.funcs()[: max(cfg.instantiations, 1)]]
    est = min(ests, key=lambda e: e.dim)
    expected = entry.expected_dimension
    out = {"measured": est.dim, "expected": expected, "passed": all(e.dim >= expected for e in ests),
           "condition_estimate": est.condition_estimate}
    if est.dim > expected:
        out["excess"] = True
        out["exclusions"] = entry.exclusions
        out["params"] = params
    return out


def _rename_params(e: Expr, names: Iterable[str], suffix: str = "__c") -> tuple[Expr, dict]:
    mapping = {n: n + suffix for n in names}
    return subs(e, {k: parse(v) for k, v in mapping.items()}), mapping


def reduction_expression(entry: CatalogEntry, target_F: Expr, red: Reduction, d: Diffeo2,
                         placeholder: Mapping[str, str]) -> tuple[Expr, list[str]]:
    """``Fbar(aux) - target(tbar, xbar, cbar, fbar)`` with target parameters renamed ``name__c``."""
    target_params = sorted(s for s in free_symbols(target_F) if s not in VARIABLES)
    renamed, mapping = _rename_params(target_F, target_params)
    tie = {mapping[k]: parse(v) for k, v in red.tie.items() if k in mapping}
    renamed = subs(renamed, tie)
    for name, template in placeholder.items():
        tmpl = parse(template)
        tmpl, _ = _rename_params(tmpl, [p for p in red.fit if p in free_symbols(tmpl)])
        renamed = substitute_function(renamed, name, tmpl, placeholders(renamed).get(name, 1))
    lhs = d.Fbar(entry.F)
    rhs = pull_back_candidate(d, renamed)
    fit_names = [mapping.get(k, k + "__c") for k in red.fit]
    return add(lhs, neg(rhs)), fit_names


def _fit(expr: Expr, fit_names: list[str], guesses: list[float], values: dict, funcs: dict, n: int,
         good: float = 1e-13):
    def resid(theta):
        vals = {**values, **dict(zip(fit_names, theta))}
        v, m = _eval_array(expr, vals, funcs, with_magnitude=True)
        v = np.broadcast_to(np.asarray(v, dtype=float), (n,))
        m = np.broadcast_to(np.asarray(m, dtype=float), (n,))
        r = v / (1.0 + m)
        return np.where(np.isfinite(r), r, 1.0)

    if not fit_names:
        return [], float(np.max(np.abs(resid([]))))
    rng = np.random.default_rng(0)
    g = np.asarray(guesses, dtype=float)
    starts = [g]
    for _ in range(11):
        # sign flips and rescaling, plus a little additive jitter so zero guesses move too
        starts.append(g * rng.choice([-1, 1], g.size) * rng.uniform(0.5, 2, g.size) + rng.normal(0, 0.3, g.size))

    def solve(x0, budget):
        try:
            sol = least_squares(resid, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=budget)
        except ValueError:
            return None
        return list(map(float, sol.x)), float(np.max(np.abs(sol.fun)))

    # short runs from every start, then polish the most promising one
    best = None
    for x0 in starts:
        res = solve(x0, 60 * (g.size + 1))
        if res is not None and (best is None or res[1] < best[1]):
            best = res
        if best is not None and best[1] < good:
            return best
    if best is not None:
        polished = solve(best[0], 2000)
        if polished is not None and polished[1] < best[1]:
            best = polished
    return best


def check_reduction(entry: CatalogEntry, catalog: Mapping[str, CatalogEntry], cfg: VerifyConfig) -> dict:
    red = entry.reduction
    target = catalog.get(red.target)
    target_F = parse(red.target_F) if red.target_F else target.F
    variants = [{"label": "printed", "map": red.map_name, "map_params": red.map_params, "phi": red.phi,
                 "psi": red.psi}]
    for alt in red.alternatives:
        variants.append({"label": alt.get("label", "alternative"), "map": alt.get("map"),
                         "map_params": alt.get("map_params", {}), "phi": alt.get("phi"), "psi": alt.get("psi")})
    outcomes = []
    for var in variants:
        r = Reduction(var["map"], var["map_params"], var["phi"], var["psi"], red.target, red.target_F,
                      red.tie, red.fit, red.placeholder, [], red.domain)
        outcomes.append({"variant": var["label"], **_check_one_reduction(entry, target_F, r, cfg)})
    passed = any(o["passed"] for o in outcomes)
    out = {"passed": passed, "target": red.target, "variants": outcomes}
    if len(outcomes) > 1:
        out["verified_variants"] = [o["variant"] for o in outcomes if o["passed"]]
    return out


def _check_one_reduction(entry: CatalogEntry, target_F: Expr, red: Reduction, cfg: VerifyConfig) -> dict:
    dom = entry.sampling_domain(red.domain)
    constraints = [Constraint(cn) for cn in entry.constraints]
    aux_params = entry.parameters | {p for cn in constraints for p in cn.symbols}
    aux_params |= {s for v in red.map_params.values() for s in free_symbols(parse(v))} - set(VARIABLES)
    for txt in (red.phi, red.psi):
        if txt:
            aux_params |= free_symbols(parse(txt)) - set(VARIABLES)
    rng = np.random.default_rng([_entry_seed(cfg, entry.id), 17])
    funcs_sets = entry.funcs()[: cfg.instantiations]
    fitted = []
    worst = 0.0
    for draw in range(cfg.param_draws):
        pvals = draw_parameters(aux_params, rng, dom, constraints)
        d = red.diffeo(pvals)
        expr, fit_names = reduction_expression(entry, target_F, red, d, red.placeholder)
        expr = subs(expr, pvals)
        guesses = [float(_eval_array(parse(str(g)), pvals, {})[0]) for g in red.fit.values()]
        for k, funcs in enumerate(funcs_sets):
            n = max(cfg.samples, 3 * len(fit_names) + 10)
            pts = sample_points(("t", "x", "c", "f"), n, rng, dom)
            best = _fit(expr, fit_names, guesses, pts, funcs, n, good=0.01 * cfg.tol)
            if best is None:
                return {"passed": False, "reason": "fit failed", "params": pvals}
            theta, _ = best
            fitted_vals = dict(zip(fit_names, theta))
            check = subs(expr, fitted_vals)
            try:
                v = is_zero(check, domain=dom, n_samples=cfg.samples, tol=cfg.tol, param_draws=1,
                            instantiations=[funcs], seed=_entry_seed(cfg, entry.id) + 101 * draw + k,
                            symbolic=False, variables=("t", "x", "c", "f"))
            except DomainError as exc:
                return {"passed": False, "reason": str(exc), "params": pvals}
            worst = max(worst, v.max_ratio)
            fitted.append({"params": pvals, "fitted": {k_.removesuffix("__c"): val for k_, val in fitted_vals.items()}})
            if not v.is_zero:
                return {"passed": False, "reason": "transformed force differs from target",
                        "witness": v.witness, "value": v.value, "params": pvals,
                        "fitted": fitted[-1]["fitted"]}
    return {"passed": True, "max_ratio": worst, "fitted": fitted[:1]}


@dataclass
class EntryReport:
    id: str
    table_id: int
    class_id: str
    kind: str
    F: str
    residuals: list = field(default_factory=list)
    closure: dict | None = None
    dimension: dict | None = None
    reduction: dict | None = None

    @property
    def passed(self) -> bool:
        ok = all(r["passed"] for r in self.residuals)
        for part in (self.closure, self.dimension, self.reduction):
            if part is not None:
                ok = ok and part["passed"]
        return ok

    @property
    def failures(self) -> list[str]:
        out = [f"residual {r['generator']}" for r in self.residuals if not r["passed"]]
        for name in ("closure", "dimension", "reduction"):
            part = getattr(self, name)
            if part is not None and not part["passed"]:
                out.append(name)
        return out

    def to_json(self) -> dict:
        out = {"id": self.id, "table": self.table_id, "class": self.class_id, "kind": self.kind, "F": self.F,
               "passed": self.passed}
        if self.residuals:
            out["residuals"] = self.residuals
        for name in ("closure", "dimension", "reduction"):
            part = getattr(self, name)
            if part is not None:
                out[name] = part
        return out


def verify_entry(entry: CatalogEntry, cfg: VerifyConfig | None = None,
                 catalog: Mapping[str, CatalogEntry] | None = None) -> EntryReport:
    cfg = cfg or VerifyConfig()
    rep = EntryReport(entry.id, entry.table_id, entry.class_id, entry.kind, entry.text)
    if entry.kind == "canonical":
        rep.residuals = check_generators(entry, cfg)
        if cfg.check_closure:
            rep.closure = check_closure(entry, cfg)
        if cfg.check_dimension:
            try:
                rep.dimension = check_dimension(entry, cfg)
            except (FieldError, DomainError) as exc:
                rep.dimension = {"passed": False, "error": str(exc)}
    else:
        rep.reduction = check_reduction(entry, catalog or {}, cfg)
    return rep


@dataclass
class VerificationReport:
    entries: list[EntryReport]
    config: VerifyConfig

    @property
    def failures(self) -> list[EntryReport]:
        return [e for e in self.entries if not e.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        return {"entries": len(self.entries), "passed": len(self.entries) - len(self.failures),
                "failed": len(self.failures),
                "residual_checks": sum(len(e.residuals) for e in self.entries),
                "residual_failures": sum(1 for e in self.entries for r in e.residuals if not r["passed"])}

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "summary": self.summary(),
                "entries": [e.to_json() for e in sorted(self.entries, key=lambda e: (e.table_id, e.id))]}

    def dumps(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json(), indent=indent, sort_keys=True, default=str)

    def table(self) -> str:
        rows = [("table", "id", "kind", "generators", "closure", "dim", "reduction", "status")]
        for e in sorted(self.entries, key=lambda e: (e.table_id, e.id)):
            gens = f"{sum(r['passed'] for r in e.residuals)}/{len(e.residuals)}" if e.residuals else "-"
            clo = "-" if e.closure is None else ("ok" if e.closure["passed"] else "FAIL")
            if e.dimension is None:
                dim = "-"
            elif "measured" in e.dimension:
                dim = f"{e.dimension['measured']}/{e.dimension['expected']}"
            else:
                dim = "FAIL"
            red = "-" if e.reduction is None else ("ok" if e.reduction["passed"] else "FAIL")
            rows.append((str(e.table_id), e.id, e.kind, gens, clo, dim, red, "pass" if e.passed else "FAIL"))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        s = self.summary()
        lines.append(f"{s['passed']}/{s['entries']} entries pass")
        return "\n".join(lines)


def verify_all(cfg: VerifyConfig | None = None, entries: Sequence[CatalogEntry] | None = None,
               tables: Iterable[int] = TABLE_IDS) -> VerificationReport:
    cfg = cfg or VerifyConfig()
    entries = list(entries) if entries is not None else load_catalog(tables=tables)
    wanted = set(tables)
    by_id = {e.id: e for e in entries}
    if entries and any(e.reduction for e in entries):
        # reductions may target entries of other tables
        missing = {e.reduction.target for e in entries if e.reduction} - set(by_id)
        if missing:
            by_id.update({e.id: e for e in load_catalog() if e.id in missing})
    reports = [verify_entry(e, cfg, by_id) for e in entries if e.table_id in wanted]
    return VerificationReport(reports, cfg)


# ---------------------------------------------------------------------------
# fault injection
# ---------------------------------------------------------------------------

_PERTURBATIONS = ("t^2", "x^2", "t*x", "t^3", "x*t^2", "t + x^2")


def mutate(entries: Sequence[CatalogEntry], rng: random.Random) -> tuple[list[CatalogEntry], dict]:
    """Copy of ``entries`` with one canonical basis generator corrupted."""
    canon = [i for i, e in enumerate(entries) if e.kind == "canonical"]
    i = rng.choice(canon)
    entry = copy.copy(entries[i])
    k = rng.randrange(len(entry.basis))
    comp = rng.randrange(2)
    extra = parse(rng.choice(_PERTURBATIONS))
    basis = list(entry.basis)
    tau, xi = basis[k]
    basis[k] = (add(tau, extra), xi) if comp == 0 else (tau, add(xi, extra))
    entry.basis = basis
    out = list(entries)
    out[i] = entry
    info = {"entry": entry.id, "generator": k + 1, "component": "tau" if comp == 0 else "xi",
            "added": to_text(extra)}
    return out, info


def mutation_test(n: int = 10, seed: int = 0, cfg: VerifyConfig | None = None) -> list[dict]:
    """Corrupt one generator at a time and record whether a failure with a witness is reported."""
    cfg = cfg or VerifyConfig(check_dimension=False)
    base = load_catalog()
    rng = random.Random(seed)
    results = []
    for _ in range(n):
        mutated, info = mutate(base, rng)
        entry = next(e for e in mutated if e.id == info["entry"])
        rep = verify_entry(entry, cfg)
        witness = None
        for r in rep.residuals:
            if not r["passed"] and r.get("witness"):
                witness = r["witness"]
                break
        if witness is None and rep.closure and not rep.closure["passed"]:
            witness = rep.closure.get("witness")
        results.append({**info, "detected": not rep.passed, "witness": witness, "failures": rep.failures})
    return results


__all__ = [
    "CatalogEntry", "CatalogError", "Reduction", "VerifyConfig", "EntryReport", "VerificationReport",
    "load_catalog", "load_table", "entries_from_data", "verify_entry", "verify_all", "mutate",
    "mutation_test", "check_generators", "check_closure", "check_dimension", "check_reduction",
]
