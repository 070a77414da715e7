"""Walk down the dimension hierarchy: the more structure a force law has, the
fewer point symmetries survive.  For each force we estimate the algebra
dimension with a cubic polynomial ansatz and print the recovered generators."""
from kinsym.classify import estimate_dimension, residual_27
from kinsym.expr import Instantiation, is_zero, parse, to_text

FORCES = [
    ("free particle", "0", None, None),
    ("inverse density", "P/f", {"P": 1.7}, None),
    ("quadratic density", "P*f^2", {"P": 1.3}, None),
    ("rotation invariant", "(((x - c*t)^2 + 1 + c^2)/(1 + x^2 + t^2))^(3/2)*G(((x - c*t)^2 + 1 + c^2)^(3/2)*f)",
     None, {"G": Instantiation.from_text("G", "_z0^2 + 1")}),
    ("velocity and density", "f^2 + c^4", None, None),
]

for label, text, params, funcs in FORCES:
    F = parse(text)
    est = estimate_dimension(F, 3, params=params, funcs=funcs)
    print(f"{label:22s} dim = {est.dim}")
    for tau, xi in est.basis:
        ok = is_zero(residual_27(F, tau, xi).expr, fixed=params, instantiations=[funcs] if funcs else None)
        print(f"    tau = {to_text(tau):30s} xi = {to_text(xi):30s} {'ok' if ok else 'FAILS'}")

# A single scaling generator is not a symmetry of F = P/f ...
F = parse("P/f")
print("\nt d/dt + x d/dx on P/f:", is_zero(residual_27(F, parse("t"), parse("x")).expr))
# ... but the one with the opposite sign on x is
print("t d/dt - x d/dx on P/f:", is_zero(residual_27(F, parse("t"), parse("-x")).expr))
