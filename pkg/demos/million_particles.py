"""The line engine at scale: one million particles.

Order preservation on the line means only adjacent clusters can collide
first, so the event loop needs one candidate per neighbor pair and runs
in O(N log N); the compiled kernel keeps the constant small.

Run:  python3 demos/million_particles.py
"""

import math
import time

import numpy as np

from stickysim import Scenario, simulate_1d_fast

rng = np.random.default_rng(0)
n = 1_000_000
m = np.full(n, 1.0 / n)
m[-1] += 1.0 - math.fsum(m.tolist())
x = np.sort(rng.uniform(0.0, 1000.0, n))
v = rng.uniform(-1.0, 1.0, n)
sc = Scenario.from_arrays(m, x[:, None], v[:, None], horizon=2.0)

simulate_1d_fast(
    Scenario.from_arrays([0.5, 0.5], [[0.0], [1.0]], [[1.0], [-1.0]])
)  # warm the compiled kernel

t0 = time.perf_counter()
res = simulate_1d_fast(sc)
elapsed = time.perf_counter() - t0

merges = len(res.forest.born) - n
print(f"n = {n:,} particles on [0, 1000], horizon 2.0")
print(f"simulated in {elapsed:.2f} s")
print(f"{len(res.events):,} events, {merges:,} merges (bound: n-1)")
print(f"{len(res.final_cluster_ids):,} clusters remain")

_, V = res.states_at([0.0, 2.0])
p0 = float(sc.masses @ sc.velocities[:, 0])
p1 = float(sc.masses @ V[1, :, 0])
print(f"momentum drift over the whole run: {abs(p1 - p0):.2e}")
