"""Velocity total variation and its a-priori bound.

Each particle's velocity path is a step function that only changes at
collisions.  The mass-weighted sum of the path variations is controlled
by twice the initial velocity spread, independent of N and of how many
collisions occur.

Run:  python3 demos/variation_bounds.py
"""

import numpy as np

from stickysim import (
    Scenario,
    mass_avg_variation,
    simulate_1d_fast,
    variation_bound,
    velocity_spread,
)

rng = np.random.default_rng(7)

print("two-particle identity: variation = 2 m1 m2 |v1 - v2|")
for m1 in (0.1, 0.3, 0.5):
    sc = Scenario.from_arrays(
        [m1, 1.0 - m1], [[0.0], [1.0]], [[0.8], [-0.6]], horizon=5.0
    )
    got = mass_avg_variation(simulate_1d_fast(sc))
    expect = 2.0 * m1 * (1.0 - m1) * 1.4
    print(f"  m1={m1:.1f}:  variation {got:.10f}  closed form {expect:.10f}")

print("\nrandom systems: variation vs the bound 2*max|vi-vj|")
print(f"  {'N':>5}  {'events':>6}  {'variation':>10}  {'bound':>7}  {'used':>5}")
for n in (10, 50, 200, 1000):
    m = rng.uniform(0.5, 1.5, n)
    sc = Scenario.from_arrays(
        m / m.sum(),
        np.sort(rng.uniform(0.0, 2.0, n))[:, None],
        rng.uniform(-1.0, 1.0, (n, 1)),
    )
    res = simulate_1d_fast(sc)
    var = mass_avg_variation(res)
    bound = variation_bound(sc)
    print(
        f"  {n:>5}  {len(res.events):>6}  {var:>10.4f}  {bound:>7.4f}"
        f"  {100 * var / bound:>4.0f}%"
    )

print("\nthe spread that drives the bound is a diameter, not a max norm:")
v = rng.uniform(-1.0, 1.0, (6, 2))
print(f"  velocities:\n{np.array2string(v, precision=3)}")
print(f"  spread (largest pairwise distance): {velocity_spread(v):.4f}")
