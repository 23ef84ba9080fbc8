"""Conservation and dissipation under merges, and the weak-form residuals.

Merging by mass-averaged velocity keeps total momentum exact, can only
dissipate kinetic energy, and makes the flow a weak solution of the
mass/momentum equations: integrating any smooth compactly supported
space-time bump against the flow telescopes to zero.

Run:  python3 demos/conservation.py
"""

import numpy as np

from stickysim import (
    Scenario,
    averaging_residuals,
    kinetic_energy,
    momentum,
    random_test_functions,
    simulate,
    weak_residuals,
)

rng = np.random.default_rng(11)

# planar system; groups aimed at shared points so collisions happen
n, d = 12, 2
m = rng.uniform(0.5, 1.5, n)
x = np.empty((n, d))
v = np.empty((n, d))
for i in range(0, n, 3):
    center = rng.uniform(-1.0, 1.0, d)
    x[i : i + 3] = center + rng.uniform(-0.2, 0.2, (3, d))
    target = center + rng.uniform(-0.3, 0.3, d)
    v[i : i + 3] = (target - x[i : i + 3]) / rng.uniform(0.8, 1.5)
sc = Scenario.from_arrays(m / m.sum(), x, v)
res = simulate(sc)
print(f"planar system: n={n}, {len(res.events)} events")

times = np.concatenate([np.linspace(0.0, 2.0, 6), res.events.times])
times = np.unique(times)
p = momentum(res, times)
ke = kinetic_energy(res, times)
p0 = sc.masses @ sc.velocities
print("\n  time        momentum drift   kinetic energy")
for k, t in enumerate(times):
    drift = np.abs(p[k] - p0).max()
    print(f"  {t:8.4f}    {drift:.3e}        {ke[k]:.6f}")
print(f"\n  energy dissipated: {ke[0] - ke[-1]:.6f} (never increases)")

pairs = [(0.0, 2.0), (0.1, 0.9), (0.3, 1.7)]
print(f"\naveraging residual over 10 maps x {len(pairs)} time pairs: "
      f"{averaging_residuals(res, pairs):.3e}")

tests = random_test_functions(res, 5, seed=3)
tests += random_test_functions(res, 5, seed=4, vector=True)
mass_r, mom_r = weak_residuals(res, tests)
print(f"weak residuals over 10 random bumps: mass {mass_r:.3e}, "
      f"momentum {mom_r:.3e}")
