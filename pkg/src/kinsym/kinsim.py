"""Characteristics-based simulation of the one-dimensional kinetic equation

    f_t + c f_x + (F(t, x, c) f)_c = 0.

Along dx/dt = c, dc/dt = F the density obeys dw/dt = -F_c w, so a solution is
evaluated by following the characteristic back to t = 0 and applying the
accumulated Liouville weight.  The module also provides the particle-number
flux through a surface t = theta(x, c), the transport of a solution under a
change of variables, and two independent oracles (a finite-difference PDE
residual and a first-order upwind grid solver).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import erf

from .equivtrans import Diffeo2, SingularPointError, inverse_point_exprs, transform_force
from .expr import FORCE, Expr, Instantiation, _eval_array, as_expr, depends_on, diff, free_symbols

DEFAULT_TOL = 1e-10


class CharacteristicError(ArithmeticError):
    """Integration broke down (step-size underflow or a non-finite force)."""

    def __init__(self, message: str, t_blowup: float | None = None):
        super().__init__(message)
        self.t_blowup = t_blowup


class SurfaceError(ValueError):
    pass


@dataclass(frozen=True)
class CharState:
    t: float
    x: float
    c: float
    w: float = 1.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.t, self.x, self.c, self.w)


@dataclass(frozen=True)
class StepConfig:
    """Integrator settings.  ``fixed_step`` turns the adaptive pair into a fixed-step method."""

    method: str = "DOP853"
    rtol: float = DEFAULT_TOL
    atol: float = DEFAULT_TOL
    fixed_step: float | None = None

    def ivp_kwargs(self) -> dict:
        if self.fixed_step is None:
            return {"method": self.method, "rtol": self.rtol, "atol": self.atol}
        # huge tolerances accept every step, max_step pins its length
        return {"method": self.method, "rtol": 1e3, "atol": 1e3, "first_step": self.fixed_step,
                "max_step": self.fixed_step}


@dataclass
class Trajectory:
    states: list[CharState]
    sol: object = field(repr=False, default=None)
    nfev: int = 0

    @property
    def final(self) -> CharState:
        return self.states[-1]

    def __call__(self, t: float) -> CharState:
        """Dense-output state at time ``t``."""
        if self.sol is None:
            raise ValueError("trajectory was integrated without dense output")
        x, c, w = self.sol(t)
        return CharState(float(t), float(x), float(c), float(w))

    def to_csv(self) -> str:
        lines = ["t,x,c,w"]
        lines += [f"{s.t!r},{s.x!r},{s.c!r},{s.w!r}" for s in self.states]
        return "\n".join(lines) + "\n"


class _Force:
    """Numeric F and its c/f derivatives, vectorized over sample arrays."""

    def __init__(self, F, params: Mapping[str, float] | None = None,
                 funcs: Mapping[str, Instantiation] | None = None):
        self.F = as_expr(F)
        self.params = dict(params or {})
        self.funcs = dict(funcs or {})
        missing = free_symbols(self.F) - {"t", "x", "c", "f"} - set(self.params)
        if missing:
            raise ValueError(f"unbound parameters in F: {sorted(missing)}")
        if FORCE in free_symbols(self.F):
            raise ValueError("F may not contain the Force symbol")
        self.F_c = diff(self.F, "c")
        self.F_f = diff(self.F, "f")
        self.f_dependent = depends_on(self.F, "f")

    def _ev(self, e, t, x, c, f=None):
        vals = {"t": t, "x": x, "c": c, **self.params}
        if f is not None:
            vals["f"] = f
        v = _eval_array(e, vals, self.funcs)[0]
        return np.broadcast_to(np.asarray(v, dtype=float), np.shape(x))

    def value(self, t, x, c, f=None):
        return self._ev(self.F, t, x, c, f)

    def dc(self, t, x, c, f=None):
        return self._ev(self.F_c, t, x, c, f)

    def df(self, t, x, c, f=None):
        return self._ev(self.F_f, t, x, c, f)


def _run(rhs, t0, t1, y0, cfg: StepConfig, dense: bool, t_eval=None):
    with np.errstate(all="ignore"):
        sol = solve_ivp(rhs, (t0, t1), y0, dense_output=dense, t_eval=t_eval, **cfg.ivp_kwargs())
    if sol.status < 0 or not np.all(np.isfinite(sol.y)):
        t_bad = float(sol.t[-1]) if sol.t.size else t0
        raise CharacteristicError(f"characteristic integration failed near t={t_bad:.6g}: {sol.message}", t_bad)
    return sol


def integrate_characteristic(F, s0: CharState, t_end: float, cfg: StepConfig | None = None,
                             params: Mapping[str, float] | None = None,
                             funcs: Mapping[str, Instantiation] | None = None,
                             t_eval: Sequence[float] | None = None, dense: bool = True) -> Trajectory:
    """Solve x' = c, c' = F(t, x, c), w' = -F_c w from ``s0`` to ``t_end``."""
    cfg = cfg or StepConfig()
    force = _Force(F, params, funcs)
    if force.f_dependent:
        raise ValueError("F depends on f; use integrate_quasilinear for the experimental f-dependent system")

    def rhs(t, y):
        x, c, w = y
        return [c, float(force.value(t, x, c)), -float(force.dc(t, x, c)) * w]

    sol = _run(rhs, s0.t, t_end, [s0.x, s0.c, s0.w], cfg, dense, t_eval)
    states = [CharState(float(t), *map(float, sol.y[:, k])) for k, t in enumerate(sol.t)]
    return Trajectory(states, sol.sol if dense else None, int(sol.nfev))


def integrate_quasilinear(F, s0: CharState, t_end: float, cfg: StepConfig | None = None,
                          params: Mapping[str, float] | None = None,
                          funcs: Mapping[str, Instantiation] | None = None) -> Trajectory:
    """Experimental: characteristics of the f-dependent equation, valid until they cross.

    Writing (F f)_c = (F + f F_f) f_c + F_c f gives x' = c, c' = F + w F_f,
    w' = -F_c w with every function evaluated at f = w.  ``s0.w`` is the initial
    density value on the characteristic.
    """
    cfg = cfg or StepConfig()
    force = _Force(F, params, funcs)

    def rhs(t, y):
        x, c, w = y
        return [c, float(force.value(t, x, c, w) + w * force.df(t, x, c, w)), -float(force.dc(t, x, c, w)) * w]

    sol = _run(rhs, s0.t, t_end, [s0.x, s0.c, s0.w], cfg, True)
    states = [CharState(float(t), *map(float, sol.y[:, k])) for k, t in enumerate(sol.t)]
    return Trajectory(states, sol.sol, int(sol.nfev))


# ---------------------------------------------------------------------------
# initial data and solution samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianDatum:
    """Separable Gaussian bump in (x, c), cut to zero beyond ``support`` standard deviations."""

    x0: float = 0.0
    c0: float = 0.0
    sx: float = 0.5
    sc: float = 0.5
    amplitude: float = 1.0
    support: float = 6.0

    def __call__(self, x, c):
        u = (np.asarray(x, dtype=float) - self.x0) / self.sx
        v = (np.asarray(c, dtype=float) - self.c0) / self.sc
        inside = (np.abs(u) <= self.support) & (np.abs(v) <= self.support)
        return np.where(inside, self.amplitude * np.exp(-0.5 * (u * u + v * v)), 0.0)

    @property
    def mass(self) -> float:
        cut = erf(self.support / math.sqrt(2.0))
        return self.amplitude * 2.0 * math.pi * self.sx * self.sc * cut * cut

    def box(self, margin: float = 0.0) -> tuple[tuple[float, float], tuple[float, float]]:
        hx, hc = self.support * self.sx + margin, self.support * self.sc + margin
        return (self.x0 - hx, self.x0 + hx), (self.c0 - hc, self.c0 + hc)


def gaussian_datum(**kw) -> GaussianDatum:
    return GaussianDatum(**kw)


def backward_characteristics(F, t, x, c, cfg: StepConfig | None = None,
                             params: Mapping[str, float] | None = None,
                             funcs: Mapping[str, Instantiation] | None = None):
    """Feet (x0, c0) at time 0 and log forward weights for many points at once.

    All characteristics are integrated together in the rescaled time
    s = t'/t in [0, 1], so points with different ``t`` share one solve.
    The forward weight is exp(-int_0^t F_c dt').
    """
    cfg = cfg or StepConfig()
    force = _Force(F, params, funcs)
    if force.f_dependent:
        raise ValueError("backward evaluation needs an f-independent F")
    t, x, c = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, x, c)))
    shape = t.shape
    T, X, Cv = t.ravel(), x.ravel(), c.ravel()
    n = T.size
    if n == 0 or not np.any(T != 0):
        return x.copy(), c.copy(), np.zeros(shape)

    def rhs(s, y):
        xs, cs = y[:n], y[n:2 * n]
        ts = s * T
        return np.concatenate([T * cs, T * force.value(ts, xs, cs), T * force.dc(ts, xs, cs)])

    y0 = np.concatenate([X, Cv, np.zeros(n)])
    sol = _run(rhs, 1.0, 0.0, y0, cfg, False)
    y = sol.y[:, -1]
    # lam accumulated from s=1 down to 0 equals -int_0^t F_c, the log forward weight
    return y[:n].reshape(shape), y[n:2 * n].reshape(shape), y[2 * n:].reshape(shape)


@dataclass(frozen=True)
class Solution:
    """Read-only sampler for the solution with initial datum ``f0`` (safe for concurrent use)."""

    F: Expr
    f0: Callable
    params: Mapping[str, float] = field(default_factory=dict)
    funcs: Mapping[str, Instantiation] = field(default_factory=dict)
    cfg: StepConfig = field(default_factory=StepConfig)

    def __call__(self, t, x, c):
        x0, c0, logw = backward_characteristics(self.F, t, x, c, self.cfg, self.params, self.funcs)
        out = np.asarray(self.f0(x0, c0), dtype=float) * np.exp(logw)
        return float(out) if out.ndim == 0 else out


def evaluate_solution(F, f0: Callable, t, x, c, cfg: StepConfig | None = None,
                      params: Mapping[str, float] | None = None,
                      funcs: Mapping[str, Instantiation] | None = None):
    """f(t, x, c) for the datum f0 at t = 0; scalars give a float, arrays an array."""
    return Solution(as_expr(F), f0, dict(params or {}), dict(funcs or {}), cfg or StepConfig())(t, x, c)


# ---------------------------------------------------------------------------
# flux functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Surface:
    """The surface t = theta(x, c) over a rectangular (x, c) box."""

    theta: Expr
    box: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        th = as_expr(self.theta)
        object.__setattr__(self, "theta", th)
        extra = free_symbols(th) - {"x", "c"}
        if extra:
            raise SurfaceError(f"theta may depend on x and c only, found {sorted(extra)}")

    def pieces(self):
        return self.theta, diff(self.theta, "x"), diff(self.theta, "c")


def _gauss_nodes(box, n):
    (xa, xb), (ca, cb) = box
    nx, nc = (n, n) if isinstance(n, int) else n
    gx, wx = np.polynomial.legendre.leggauss(nx)
    gc, wc = np.polynomial.legendre.leggauss(nc)
    xs = 0.5 * (xb - xa) * gx + 0.5 * (xb + xa)
    cs = 0.5 * (cb - ca) * gc + 0.5 * (cb + ca)
    X, Cg = np.meshgrid(xs, cs, indexing="ij")
    W = np.outer(wx, wc) * 0.25 * (xb - xa) * (cb - ca)
    return X, Cg, W


def surface_factor(F, surf: Surface, x, c, params: Mapping[str, float] | None = None,
                   funcs: Mapping[str, Instantiation] | None = None):
    """t on the surface and the flux density factor 1 - c theta_x - F theta_c."""
    theta, th_x, th_c = surf.pieces()
    vals = {"x": x, "c": c}
    t = np.broadcast_to(np.asarray(_eval_array(theta, vals, {})[0], dtype=float), np.shape(x))
    tx = np.asarray(_eval_array(th_x, vals, {})[0], dtype=float)
    tc = np.asarray(_eval_array(th_c, vals, {})[0], dtype=float)
    Fv = _Force(F, params, funcs).value(t, x, c)
    return t, 1.0 - c * tx - Fv * tc


def check_surface(F, surf: Surface, n: int = 40, params=None, funcs=None) -> float:
    """Minimum of the signed flux factor on a sample grid; raises if it changes sign."""
    (xa, xb), (ca, cb) = surf.box
    X, Cg = np.meshgrid(np.linspace(xa, xb, n), np.linspace(ca, cb, n), indexing="ij")
    _, fac = surface_factor(F, surf, X, Cg, params, funcs)
    if not np.all(np.isfinite(fac)):
        raise SurfaceError("flux factor is not finite on the box")
    lo, hi = float(fac.min()), float(fac.max())
    if lo * hi <= 0 or min(abs(lo), abs(hi)) < 1e-8:
        raise SurfaceError(f"flux factor 1 - c*theta_x - F*theta_c changes sign or vanishes (range {lo:.3g}..{hi:.3g})")
    return lo if lo > 0 else -hi


def flux_through_surface(F, f: Callable, surf: Surface, n: int | tuple[int, int] = 96,
                         params: Mapping[str, float] | None = None,
                         funcs: Mapping[str, Instantiation] | None = None, check: bool = True) -> float:
    """Gauss-Legendre quadrature of (1 - c theta_x - F theta_c) f(theta, x, c) over the box."""
    if check:
        check_surface(F, surf, params=params, funcs=funcs)
    X, Cg, W = _gauss_nodes(surf.box, n)
    t, fac = surface_factor(F, surf, X, Cg, params, funcs)
    vals = np.asarray(f(t, X, Cg), dtype=float)
    return float(np.sum(W * fac * vals))


# ---------------------------------------------------------------------------
# transporting solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MappedSolution:
    """f-bar(t, x, c) = f(old point) * D^3 / J^2, with the point pulled back through the map."""

    d: Diffeo2
    f: Callable
    params: Mapping[str, float] = field(default_factory=dict)

    def __call__(self, t, x, c):
        old = inverse_point_exprs(self.d)
        vals = {"t": np.asarray(t, dtype=float), "x": np.asarray(x, dtype=float),
                "c": np.asarray(c, dtype=float), "f": 1.0, **self.params}
        to, xo, co = (np.asarray(_eval_array(old[k], vals, {})[0], dtype=float) for k in ("t", "x", "c"))
        # old["f"] with f=1 is J^2/D^3 at the old point; f-bar = f_old / that factor
        ratio = np.asarray(_eval_array(old["f"], vals, {})[0], dtype=float)
        to, xo, co, ratio = np.broadcast_arrays(to, xo, co, ratio)
        if not np.all(np.isfinite(ratio)) or np.any(ratio == 0):
            raise SingularPointError(f"map {self.d.name or '?'} is singular at a requested point")
        out = np.asarray(self.f(to, xo, co), dtype=float) / ratio
        return float(out) if out.ndim == 0 else out


def map_solution(d: Diffeo2, F, f: Callable, params: Mapping[str, float] | None = None):
    """Transformed force (new variables) and a sampler for the transported solution."""
    if d.inverse is None:
        raise ValueError(f"map {d.name or '?'} needs an explicit inverse to transport solutions")
    Fbar = transform_force(d, as_expr(F))
    return Fbar, MappedSolution(d, f, dict(params or {}))


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def fd_residual(F, f: Callable, t, x, c, h: float = 1e-3, params: Mapping[str, float] | None = None,
                funcs: Mapping[str, Instantiation] | None = None):
    """f_t + c f_x + (F f)_c by fourth-order central differences at the given points."""
    force = _Force(F, params, funcs)
    t, x, c = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, x, c)))

    def d4(g, axis):
        def at(k):
            shift = [t, x, c]
            shift[axis] = shift[axis] + k * h
            return g(*shift)
        return (at(-2) - 8 * at(-1) + 8 * at(1) - at(2)) / (12 * h)

    flux_c = lambda tt, xx, cc: force.value(tt, xx, cc) * np.asarray(f(tt, xx, cc), dtype=float)  # noqa: E731
    return d4(f, 0) + c * d4(f, 1) + d4(flux_c, 2)


@dataclass
class GridResult:
    xs: np.ndarray
    cs: np.ndarray
    f: np.ndarray
    t: float
    steps: int


def upwind_solve(F, f0: Callable, t_end: float, box, n: int = 256, cfl: float = 0.4,
                 params: Mapping[str, float] | None = None,
                 funcs: Mapping[str, Instantiation] | None = None) -> GridResult:
    """First-order conservative upwind scheme for f_t + (c f)_x + (F f)_c = 0.

    Cell-centred grid on ``box`` with zero inflow; used only as an independent
    cross-check of :func:`evaluate_solution`.
    """
    force = _Force(F, params, funcs)
    (xa, xb), (ca, cb) = box
    dx, dc = (xb - xa) / n, (cb - ca) / n
    xs = xa + dx * (np.arange(n) + 0.5)
    cs = ca + dc * (np.arange(n) + 0.5)
    X, Cg = np.meshgrid(xs, cs, indexing="ij")
    u = np.asarray(f0(X, Cg), dtype=float).copy()
    # velocity on x-faces is c (cell value); F is evaluated on c-faces
    c_face = ca + dc * np.arange(n + 1)
    Xf, Cf = np.meshgrid(xs, c_face, indexing="ij")
    t = 0.0
    steps = 0
    while t < t_end - 1e-15:
        Fface = force.value(np.full_like(Xf, t), Xf, Cf)
        vmax = max(np.abs(cs).max() / dx, np.abs(Fface).max() / dc, 1e-12)
        dt = min(cfl / vmax, t_end - t)
        # x fluxes
        fx = np.zeros((n + 1, n))
        cpos = cs > 0
        fx[1:-1][:, cpos] = (cs * u[:-1])[:, cpos]
        fx[1:-1][:, ~cpos] = (cs * u[1:])[:, ~cpos]
        # c fluxes
        fc = np.zeros((n, n + 1))
        a = Fface[:, 1:-1]
        fc[:, 1:-1] = np.where(a > 0, a * u[:, :-1], a * u[:, 1:])
        u = u - dt / dx * (fx[1:] - fx[:-1]) - dt / dc * (fc[:, 1:] - fc[:, :-1])
        t += dt
        steps += 1
    return GridResult(xs, cs, u, t, steps)


def compare_with_grid(F, f0: Callable, t_end: float, box, n: int = 256, params=None, funcs=None,
                      cfg: StepConfig | None = None) -> float:
    """Max difference between the grid oracle and the characteristic solution, relative to max |f0|."""
    grid = upwind_solve(F, f0, t_end, box, n, params=params, funcs=funcs)
    X, Cg = np.meshgrid(grid.xs, grid.cs, indexing="ij")
    exact = evaluate_solution(F, f0, np.full_like(X, t_end), X, Cg, cfg, params, funcs)
    scale = float(np.abs(np.asarray(f0(X, Cg))).max()) or 1.0
    return float(np.abs(grid.f - exact).max() / scale)


def convergence_study(F="-x", s0: CharState = CharState(0.0, 1.0, 0.0, 1.0), t_end: float = 2 * math.pi,
                      steps: Sequence[int] = (16, 32, 64, 128), method: str = "RK45",
                      exact: tuple[float, float] | None = (1.0, 0.0)) -> dict:
    """Fixed-step errors and observed orders; the default is one period of the oscillator."""
    errors = []
    for m in steps:
        tr = integrate_characteristic(F, s0, t_end, StepConfig(method=method, fixed_step=t_end / m), dense=False)
        s = tr.final
        if exact is None:
            raise ValueError("an exact final (x, c) is required")
        errors.append(math.hypot(s.x - exact[0], s.c - exact[1]))
    ratios = [errors[k] / errors[k + 1] for k in range(len(errors) - 1)]
    orders = [math.log2(r) for r in ratios]
    return {"steps": list(steps), "errors": errors, "ratios": ratios, "orders": orders}


__all__ = [
    "CharState", "StepConfig", "Trajectory", "CharacteristicError", "SurfaceError", "integrate_characteristic",
    "integrate_quasilinear", "GaussianDatum", "gaussian_datum", "backward_characteristics", "Solution",
    "evaluate_solution", "Surface", "check_surface", "flux_through_surface", "surface_factor",
    "MappedSolution", "map_solution", "fd_residual", "upwind_solve", "compare_with_grid", "GridResult",
    "convergence_study",
]
