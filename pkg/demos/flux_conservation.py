"""Particle number carried by the kinetic flow.

A Gaussian bump evolves under the harmonic force F = -x.  The flux of (1, c, F) f
through any spacelike surface t = theta(x, c) equals the initial mass, and a
Galilei boost maps the free-streaming solution to another solution."""
import numpy as np

from kinsym.equivtrans import catalog_map
from kinsym.expr import parse
from kinsym.kinsim import GaussianDatum, Solution, Surface, fd_residual, flux_through_surface, map_solution

datum = GaussianDatum(x0=0.3, c0=-0.2, sx=0.5, sc=0.4)
print(f"initial mass {datum.mass:.12f}")

F = parse("-x")
sol = Solution(F, datum)
box = ((-6, 6), (-6, 6))
for theta in ("0", "1", "0.1*x + 0.05*c + 0.5"):
    flux = flux_through_surface(F, sol, Surface(parse(theta), box), n=96)
    print(f"flux through t = {theta:22s} {flux:.12f}")

free = Solution(parse("0"), datum)
Fb, boosted = map_solution(catalog_map("galilei", {"v": 0.5}), "0", free)
rng = np.random.default_rng(0)
t, x, c = rng.uniform(0.2, 1.0, 30), rng.uniform(-1, 1, 30), rng.uniform(-1, 1, 30)
print(f"boosted force {Fb}; finite-difference residual {np.max(np.abs(fd_residual(Fb, boosted, t, x, c))):.1e}")
