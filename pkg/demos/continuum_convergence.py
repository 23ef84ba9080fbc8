"""From continuum initial data to particle systems: quantization and
convergence diagnostics.

A density plus a velocity expression is quantized into n equal-mass
atoms at quantile midpoints; refining n makes consecutive empirical
flows Cauchy in transport distance.

Run:  python3 demos/continuum_convergence.py
"""

import numpy as np

from stickysim import (
    AtomicMeasure,
    ContinuumRecipe,
    UniformDensity,
    converge_study,
    quantize,
    simulate_1d_fast,
    w1,
)
from stickysim.continuum import scenario_from_recipe, w1_atomic_to_density

recipe = ContinuumRecipe(UniformDensity(0.0, 1.0), "sin(2*pi*x)")

print("quantile-midpoint quantization of uniform(0,1):")
for n in (1, 2, 4):
    atoms = quantize(recipe, n)
    pts = ", ".join(f"{p.x[0]:.3f}" for p in atoms)
    print(f"  n={n}: atoms at [{pts}], each mass {1.0 / n:.3f}")
print("  distance to the continuum density is exactly (b-a)/(4n):")
for n in (4, 16, 64):
    mu = scenario_from_recipe(recipe, n, horizon=1.0)
    atoms = AtomicMeasure(mu.masses, mu.positions[:, 0])
    print(f"  n={n:>3}: w1 = {w1_atomic_to_density(atoms, recipe.rho0):.6f}"
          f"   (b-a)/(4n) = {1.0 / (4 * n):.6f}")

print("\nconvergence study, v0 = sin(2*pi*x):")
report = converge_study(recipe, [50, 100, 200, 400], [0.1, 0.5, 1.0, 2.0])
print("  consecutive-N w1(rho_t) per time (rows) and size pair (cols):")
header = "    t      50->100   100->200  200->400"
print(header)
for t, row in zip(report.times, report.w1_rho):
    print("  {:5.2f}   ".format(t) + "  ".join(f"{v:.2e}" for v in row))
rho_max = report.w1_rho.max(axis=0)
print("  worst-time ratios per doubling: "
      + ", ".join(f"{a / b:.2f}" for a, b in zip(rho_max[:-1], rho_max[1:])))
print("  variation bounds per N:",
      ", ".join(f"{b:.3f}" for b in report.variation_bounds),
      " (theory caps them at 4)")

print("\ntotal collapse, v0(x) = -x: every particle reaches 0 at t=1")
collapse = ContinuumRecipe(UniformDensity(0.0, 1.0), "-x")
sc = scenario_from_recipe(collapse, 101, horizon=1.5)
res = simulate_1d_fast(sc)
P, _ = res.states_at([1.0])
print(f"  n=101: {len(res.events)} event(s); positions at t=1 all at "
      f"{P[0, 0, 0]:.2e} (single point mass)")
