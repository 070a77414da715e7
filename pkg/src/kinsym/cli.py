"""Command-line front end.

Machine output is JSON on stdout; ``--pretty`` adds a human-readable table on
stderr.  Exit codes: 0 pass, 1 verification failure, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .catalog import TABLE_IDS, CatalogError, VerifyConfig, load_catalog, verify_all
from .classify import estimate_dimension, residual_27
from .equivtrans import InverseUnavailable, catalog_map, map_names, transform_force
from .expr import DomainError, ParseError, UnboundSymbolError, default_instantiations, is_zero, parse, placeholders, to_text
from .fields import FieldError, lie_bracket, prolong_tx
from .kinsim import (
    CharacteristicError,
    CharState,
    GaussianDatum,
    Solution,
    StepConfig,
    Surface,
    SurfaceError,
    flux_through_surface,
    integrate_characteristic,
)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    tol: float = 1e-9
    samples: int = 100
    draws: int = 3
    instantiations: int = 2
    degree: int = 3
    format: str = "json"

    @classmethod
    def from_file(cls, path) -> dict:
        """Parse ``key = value`` lines (``#`` comments) into overrides."""
        out = {}
        known = {f.name: f.type for f in fields(cls)}
        for k, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{k}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise UsageError(f"{path}:{k}: unknown setting {key!r}")
            out[key] = value.strip('"').strip("'")
        return out

    def merged(self, overrides: dict) -> "RunConfig":
        conv = {"seed": int, "tol": float, "samples": int, "draws": int, "instantiations": int,
                "degree": int, "format": str}
        vals = {}
        for k, v in overrides.items():
            if v is None:
                continue
            try:
                vals[k] = conv[k](v)
            except ValueError:
                raise UsageError(f"bad value for {k}: {v!r}") from None
        cfg = replace(self, **vals)
        if cfg.format not in ("json", "table"):
            raise UsageError("format must be json or table")
        return cfg

    def verify_config(self) -> VerifyConfig:
        return VerifyConfig(tol=self.tol, samples=self.samples, param_draws=self.draws,
                            instantiations=self.instantiations, seed=self.seed, degree=self.degree)


def _emit(payload: dict, args, table: str | None = None):
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    if table and (args.pretty or args.cfg.format == "table"):
        sys.stderr.write(table.rstrip() + "\n")


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return str(o)


def _params(items) -> dict[str, float]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"parameter {item!r} must look like name=value")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"parameter {k!r} needs a numeric value, got {v!r}") from None
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    F, tau, xi = parse(args.F), parse(args.tau), parse(args.xi)
    r = residual_27(F, tau, xi)
    v = is_zero(r.expr, n_samples=args.cfg.samples, tol=args.cfg.tol, param_draws=args.cfg.draws,
                fixed=_params(args.param) or None, seed=args.cfg.seed)
    payload = {"command": "check", "F": to_text(F), "tau": to_text(tau), "xi": to_text(xi),
               "passed": v.is_zero, **v.to_json()}
    table = f"check  F={to_text(F)}  X=({to_text(tau)})d_t + ({to_text(xi)})d_x  ->  " \
            f"{'pass' if v.is_zero else 'FAIL'} ({v.kind})"
    if v.witness:
        table += f"\n  witness {v.witness}  residual {v.value:.6g}"
    _emit(payload, args, table)
    return 0 if v.is_zero else 1


def cmd_verify_table(args) -> int:
    tables = args.tables or list(TABLE_IDS)
    bad = [t for t in tables if t not in TABLE_IDS]
    if bad:
        raise UsageError(f"unknown table ids {bad}; choose from {list(TABLE_IDS)}")
    cfg = args.cfg.verify_config()
    if args.no_dimension:
        cfg = replace(cfg, check_dimension=False)
    if args.catalog:
        entries = load_catalog(args.catalog, tables=tables)
        report = verify_all(cfg, entries=entries, tables=tables)
    else:
        report = verify_all(cfg, tables=tables)
    _emit(report.to_json(), args, report.table())
    return 0 if report.passed else 1


def cmd_dim(args) -> int:
    F = parse(args.F)
    degree = args.degree if args.degree is not None else args.cfg.degree
    funcs = None
    if args.instantiation is not None:
        funcs = {name: default_instantiations(arity)[args.instantiation]
                 for name, arity in placeholders(F).items()}
    est = estimate_dimension(F, degree, params=_params(args.param) or None, funcs=funcs, seed=args.cfg.seed)
    payload = {"command": "dim", **est.to_json()}
    lines = [f"dim  F={est.F}  degree {est.degree}  ->  {est.dim}"]
    lines += [f"  ({to_text(a)})d_t + ({to_text(b)})d_x" for a, b in est.basis]
    _emit(payload, args, "\n".join(lines))
    if args.expect is not None:
        return 0 if est.dim == args.expect else 1
    return 0


def cmd_transform(args) -> int:
    if args.map not in map_names():
        raise UsageError(f"unknown map {args.map!r}; available: {', '.join(map_names())}")
    params = _params(args.param)
    try:
        d = catalog_map(args.map, params or None)
    except KeyError as exc:
        raise UsageError(str(exc.args[0] if exc.args else exc)) from None
    F = parse(args.F)
    payload = {"command": "transform", "map": d.to_json(), "F": to_text(F), "params": params}
    try:
        Fbar = transform_force(d, F)
        payload["Fbar"] = to_text(Fbar)
    except InverseUnavailable:
        payload["Fbar"] = None
        payload["Fbar_old_variables"] = to_text(d.Fbar(F))
    payload["cbar"] = to_text(d.cbar())
    payload["fbar"] = to_text(d.fbar())
    table = f"transform {args.map}: F = {to_text(F)}\n  Fbar = {payload['Fbar'] or payload['Fbar_old_variables'] + '  (old variables)'}"
    _emit(payload, args, table)
    return 0


def cmd_simulate(args) -> int:
    F = parse(args.F)
    params = _params(args.param)
    step = StepConfig(rtol=args.rtol, atol=args.atol)
    datum = GaussianDatum(x0=args.x0, c0=args.c0, sx=args.sx, sc=args.sc, amplitude=args.amplitude)
    payload: dict = {"command": "simulate", "F": to_text(F), "datum": asdict(datum), "mass": datum.mass}
    if args.trajectory:
        x0, c0 = (float(v) for v in args.trajectory.split(","))
        n = max(args.points, 2)
        times = [args.t_end * k / (n - 1) for k in range(n)]
        tr = integrate_characteristic(F, CharState(0.0, x0, c0, 1.0), args.t_end, step, params, t_eval=times,
                                      dense=False)
        csv = tr.to_csv()
        if args.csv:
            Path(args.csv).write_text(csv)
            payload["trajectory_csv"] = args.csv
        else:
            payload["trajectory"] = [s.as_tuple() for s in tr.states]
    if args.theta:
        box = _box(args.box) if args.box else datum.box(1.0)
        sol = Solution(F, datum, params, {}, step)
        fluxes = []
        for th in args.theta:
            surf = Surface(parse(th), box)
            fluxes.append({"theta": to_text(surf.theta), "box": [list(b) for b in box],
                           "flux": flux_through_surface(F, sol, surf, n=args.nodes, params=params)})
        vals = [f["flux"] for f in fluxes]
        spread = (max(vals) - min(vals)) / max(abs(v) for v in vals) if any(vals) else 0.0
        payload["fluxes"] = fluxes
        payload["relative_spread"] = spread
        payload["passed"] = spread <= args.flux_tol
    table = "\n".join(f"flux through t = {f['theta']}: {f['flux']:.12g}" for f in payload.get("fluxes", []))
    _emit(payload, args, table or None)
    return 0 if payload.get("passed", True) else 1


def _box(text: str):
    try:
        xa, xb, ca, cb = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError("--box takes xmin,xmax,cmin,cmax") from None
    return (xa, xb), (ca, cb)


def cmd_bracket(args) -> int:
    X = prolong_tx(parse(args.X[0]), parse(args.X[1]))
    Y = prolong_tx(parse(args.Y[0]), parse(args.Y[1]))
    Z = lie_bracket(X, Y)
    payload = {"command": "bracket", "X": X.to_json(), "Y": Y.to_json(), "bracket": Z.to_json(),
               "prolonged": True}
    _emit(payload, args, f"[X, Y] = ({to_text(Z.tau)})d_t + ({to_text(Z.xi)})d_x")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file (flags override it)")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--samples", type=int)
    common.add_argument("--draws", type=int, help="parameter draws per check")
    common.add_argument("--instantiations", type=int, help="placeholder instantiation sets per check")
    common.add_argument("--format", choices=("json", "table"))
    common.add_argument("--pretty", action="store_true", help="human-readable table on stderr")

    p = argparse.ArgumentParser(prog="kinsym", description="Symmetry classification checks for the 1D kinetic equation.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="residual of the classifying equation for one generator")
    s.add_argument("--F", required=True)
    s.add_argument("--tau", required=True)
    s.add_argument("--xi", required=True)
    s.add_argument("--param", action="append", help="fix a parameter, name=value")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("verify-table", parents=[common], help="verify catalog tables")
    s.add_argument("tables", nargs="*", type=int)
    s.add_argument("--catalog", help="alternative catalog file or directory")
    s.add_argument("--degree", type=int)
    s.add_argument("--no-dimension", action="store_true", help="skip dimension estimates")
    s.set_defaults(func=cmd_verify_table)

    s = sub.add_parser("dim", parents=[common], help="estimate the symmetry algebra dimension")
    s.add_argument("--F", required=True)
    s.add_argument("--degree", type=int)
    s.add_argument("--param", action="append")
    s.add_argument("--instantiation", type=int, choices=(0, 1), help="placeholder instantiation index")
    s.add_argument("--expect", type=int, help="exit 1 unless the dimension equals this")
    s.set_defaults(func=cmd_dim)

    s = sub.add_parser("transform", parents=[common], help="apply a catalog change of variables to F")
    s.add_argument("--F", required=True)
    s.add_argument("--map", required=True)
    s.add_argument("--param", action="append")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("simulate", parents=[common], help="characteristics and flux through surfaces")
    s.add_argument("--F", required=True)
    s.add_argument("--param", action="append")
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--c0", type=float, default=0.0)
    s.add_argument("--sx", type=float, default=0.5)
    s.add_argument("--sc", type=float, default=0.5)
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--theta", action="append", help="surface t = theta(x, c); repeatable")
    s.add_argument("--box", help="xmin,xmax,cmin,cmax (default: datum support plus margin)")
    s.add_argument("--nodes", type=int, default=96, help="Gauss-Legendre nodes per direction")
    s.add_argument("--flux-tol", type=float, default=1e-6)
    s.add_argument("--trajectory", help="x0,c0 of a characteristic to record")
    s.add_argument("--t-end", type=float, default=1.0)
    s.add_argument("--points", type=int, default=11)
    s.add_argument("--csv", help="write the trajectory as CSV here")
    s.add_argument("--rtol", type=float, default=1e-10)
    s.add_argument("--atol", type=float, default=1e-10)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bracket", parents=[common], help="Lie bracket of two prolonged generators")
    s.add_argument("--X", nargs=2, metavar=("TAU", "XI"), required=True)
    s.add_argument("--Y", nargs=2, metavar=("TAU", "XI"), required=True)
    s.set_defaults(func=cmd_bracket)
    return p


# flags whose values may start with '-', with their value counts
_EXPR_FLAGS = {"--F": 1, "--tau": 1, "--xi": 1, "--theta": 1, "--X": 2, "--Y": 2, "--trajectory": 1, "--box": 1}


def _protect_expressions(argv: list[str]) -> list[str]:
    """Prefix expression values like ``-x`` with a space so argparse does not read them as flags."""
    out = list(argv)
    k = 0
    while k < len(out):
        n = _EXPR_FLAGS.get(out[k], 0)
        for j in range(k + 1, min(k + 1 + n, len(out))):
            if out[j].startswith("-") and out[j] not in _EXPR_FLAGS:
                out[j] = " " + out[j]
        k += 1 + n
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _protect_expressions(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        overrides = RunConfig.from_file(args.config) if args.config else {}
        flags = {k: getattr(args, k, None) for k in ("seed", "tol", "samples", "draws", "instantiations", "format")}
        if getattr(args, "degree", None) is not None:
            flags["degree"] = args.degree
        overrides.update({k: v for k, v in flags.items() if v is not None})
        args.cfg = RunConfig().merged(overrides)
        return args.func(args)
    except (UsageError, ParseError, UnboundSymbolError, CatalogError, FieldError, SurfaceError,
            OSError) as exc:
        sys.stderr.write(f"kinsym {args.command}: error: {exc}\n")
        return 2
    except (DomainError, CharacteristicError) as exc:
        sys.stderr.write(f"kinsym {args.command}: failed: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
