"""Exact 1D transport distance and the velocity pushforward curve.

w1 integrates |F_mu - F_nu| between the two CDFs, which is exact for
atomic measures.  Pushing the mass distribution forward through the
velocity field gives a step curve in transport space whose total
variation obeys the same bounds as the particle paths.

Run:  python3 demos/transport_curves.py
"""

import numpy as np

from stickysim import (
    AtomicMeasure,
    Scenario,
    curve_variation,
    mass_avg_variation,
    pushforward_curve,
    simulate_1d_fast,
    velocity_spread,
    w1,
)

mu = AtomicMeasure([0.5, 0.5], [0.0, 1.0])
nu = AtomicMeasure([1.0], [0.5])
print(f"w1(two half-atoms at 0 and 1, one atom at 0.5) = {w1(mu, nu)}")
print(f"w1 is symmetric bit for bit: {w1(nu, mu) == w1(mu, nu)}")
print(f"w1(mu, mu) = {w1(mu, mu)} exactly")

rng = np.random.default_rng(5)
n = 40
m = rng.uniform(0.5, 1.5, n)
sc = Scenario.from_arrays(
    m / m.sum(),
    np.sort(rng.uniform(0.0, 2.0, n))[:, None],
    rng.uniform(-1.0, 1.0, (n, 1)),
)
res = simulate_1d_fast(sc)
curve = pushforward_curve(res)
print(f"\nrandom line system: n={n}, {len(res.events)} events")
print(f"pushforward curve: {len(curve.measures)} constant pieces")
print("  first few jump sizes in transport distance:")
for k in range(min(5, len(curve.measures) - 1)):
    gap = w1(curve.measures[k], curve.measures[k + 1])
    print(f"    event {k + 1} at t={curve.event_times[k + 1]:.4f}:  w1 jump {gap:.5f}")

cv = curve_variation(curve)
print(f"\ncurve variation              {cv:.5f}")
print(f"mass-averaged path variation {mass_avg_variation(res):.5f}  (upper bound)")
print(f"2 x initial velocity spread  {2 * velocity_spread(sc.velocities):.5f}  (upper bound)")
