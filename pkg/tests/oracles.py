"""Independent reference computations for the test-suite.

Everything here is written directly from the mathematics with sympy or in
closed form; none of it calls into the package's symbolic machinery except
for converting expression text, so agreement is a genuine cross-check.
"""
from __future__ import annotations

import math

import numpy as np
import sympy as sp

t, x, c, f, Force = sp.symbols("t x c f Force", real=True)
G = sp.Function("G")

_LOCALS = {"t": t, "x": x, "c": c, "f": f, "Force": Force, "ln": sp.log, "abs": sp.Abs, "G": G,
           "exp": sp.exp, "sqrt": sp.sqrt, "atan": sp.atan, "tan": sp.tan, "sin": sp.sin, "cos": sp.cos,
           "sinh": sp.sinh, "cosh": sp.cosh, "tanh": sp.tanh}


def to_sympy(text: str) -> sp.Expr:
    """Expression text (package grammar, no primed placeholders) as a sympy expression."""
    from sympy.parsing.sympy_parser import parse_expr

    return parse_expr(text.replace("^", "**"), local_dict=dict(_LOCALS), evaluate=True)


def classifying_residual(F, tau, xi) -> sp.Expr:
    """Left minus right side of the merged classifying equation, as printed."""
    F, tau, xi = (sp.sympify(v) for v in (F, tau, xi))
    d = sp.diff
    lhs = ((3 * c * d(tau, x) - d(xi, x) + 2 * d(tau, t)) * F + tau * d(F, t) + xi * d(F, x)
           + (d(xi, t) + c * d(xi, x) - c * d(tau, t) - c**2 * d(tau, x)) * d(F, c)
           + f * (3 * c * d(tau, x) - 2 * d(xi, x) + d(tau, t)) * d(F, f))
    rhs = (d(xi, t, 2) + c * (2 * d(xi, t, x) - d(tau, t, 2)) + c**2 * (d(xi, x, 2) - 2 * d(tau, t, x))
           - c**3 * d(tau, x, 2))
    return sp.expand(lhs - rhs)


def prolongation(tau, xi):
    """(alpha, eta) of the symmetry field generated by (tau, xi)."""
    d = sp.diff
    alpha = d(xi, t) + c * d(xi, x) - c * d(tau, t) - c**2 * d(tau, x)
    eta = f * (3 * c * d(tau, x) - 2 * d(xi, x) + d(tau, t))
    return sp.expand(alpha), sp.expand(eta)


def bracket(X, Y):
    """Lie bracket of fields given as (tau, xi, alpha, eta) tuples on (t, x, c, f)."""
    coords = (t, x, c, f)

    def act(V, g):
        return sum(v * sp.diff(g, z) for v, z in zip(V, coords))

    return tuple(sp.expand(act(X, b) - act(Y, a)) for a, b in zip(X, Y))


def induced_action(phi, psi, F=Force):
    """Velocity, density and force induced by tbar=phi, xbar=psi, from first principles.

    The velocity is dxbar/dtbar along dx = c dt, the force is the derivative of
    that velocity along the characteristic field (1, c, F) divided by dtbar/dt,
    and the density is fixed by requiring the flux 2-form
    f (dx^dc - c dt^dc + F dt^dx) to be preserved.
    """
    def along(g):
        return sp.diff(g, t) + c * sp.diff(g, x) + F * sp.diff(g, c)

    cbar = sp.simplify(along(psi) / along(phi))
    Fbar = sp.simplify(along(cbar) / along(phi))
    # 1-form coefficients in (dt, dx, dc)
    dT = (sp.diff(phi, t), sp.diff(phi, x), 0)
    dX = (sp.diff(psi, t), sp.diff(psi, x), 0)
    dC = (sp.diff(cbar, t), sp.diff(cbar, x), sp.diff(cbar, c))

    def wedge_xc(a, b):  # coefficient of dx^dc in a^b
        return a[1] * b[2] - a[2] * b[1]

    form_xc = wedge_xc(dX, dC) - cbar * wedge_xc(dT, dC) + Fbar * wedge_xc(dT, dX)
    fbar = sp.simplify(f / form_xc)
    return cbar, fbar, Fbar


# ---------------------------------------------------------------------------
# closed-form kinetic solutions
# ---------------------------------------------------------------------------

def free_transport(f0, t_, x_, c_):
    return f0(x_ - c_ * t_, c_)


def constant_force(g, f0, t_, x_, c_):
    return f0(x_ - c_ * t_ + g * t_**2 / 2, c_ - g * t_)


def linear_friction(f0, t_, x_, c_):
    """F = c: backward characteristics c0 = c e^{-t}, x0 = x - c(1 - e^{-t}); density decays like e^{-t}."""
    e = np.exp(-t_)
    return f0(x_ - c_ * (1 - e), c_ * e) * e


def oscillator(s0, t_):
    """F = -x from (x0, c0) at time 0."""
    x0, c0 = s0
    return x0 * math.cos(t_) + c0 * math.sin(t_), -x0 * math.sin(t_) + c0 * math.cos(t_)


def gaussian_mass(sx, sc, amplitude=1.0, support=6.0):
    cut = math.erf(support / math.sqrt(2.0))
    return amplitude * 2 * math.pi * sx * sc * cut * cut
