"""Changes of variables that move force laws around inside the equation class.

A shear in x absorbs a constant force; the swap of t and x turns the cubic
velocity factor into the plain placeholder; composing two projective maps
gives back a reflection."""
from kinsym.equivtrans import catalog_map, check_catalog_map, compose, group_law_defect, map_names, transform_force
from kinsym.expr import parse, to_text

shear = catalog_map("shear", {"Q": 2})
print("shear:    P/f + 2      ->", to_text(transform_force(shear, parse("P/f + 2"))))

swap = catalog_map("swap")
print("swap:     c^3*G(c^3*f) ->", to_text(transform_force(swap, parse("c^3*G(c^3*f)"))))

proj = catalog_map("projective")
twice = compose(proj, proj)
print("projective twice: t ->", to_text(twice.phi), " x ->", to_text(twice.psi))
print("group law defect (galilei after projective):",
      f"{group_law_defect(catalog_map('galilei', {'v': 0.7}), proj):.1e}")

print("\nprinted formulas of the catalog maps:")
for name in map_names():
    chk = check_catalog_map(name)
    bad = [k for k, r in chk.results.items() if r["verdict"] == "NonZero"]
    note = "" if not bad else f"  printed {', '.join(bad)} disagrees; corrected: " \
        f"{'ok' if check_catalog_map(name, use_corrected=True).passed else 'still fails'}"
    print(f"  {name:14s} {'ok' if chk.passed else 'MISMATCH'}{note}")
