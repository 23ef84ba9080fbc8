"""Event-driven collisions on the line: three small systems, fully traced.

Run:  python3 demos/collisions.py
"""

import numpy as np

from stickysim import Scenario, simulate_1d_fast


def trace(title, sc):
    print(f"\n== {title} ==")
    res = simulate_1d_fast(sc)
    for ev in res.events:
        for group, post in zip(ev.groups, ev.post_velocities):
            members = sorted(
                int(i) for g in group for i in res.members_of(int(g))
            )
            print(
                f"  t={ev.time:.6f}  particles {members} merge, "
                f"velocity -> {post[0]:+.6f}"
            )
    if len(res.events) == 0:
        print("  no collisions before the horizon")
    for c in res.final_clusters:
        print(
            f"  final cluster {sorted(c.members)}: mass {c.mass:.3f}, "
            f"moving at {c.velocity[0]:+.4f}"
        )
    return res


# Two equal masses head on: they meet at 0.5 and stop (momentum zero).
trace(
    "head-on pair",
    Scenario.from_arrays([0.5, 0.5], [[0.0], [1.0]], [[1.0], [-1.0]]),
)

# Three paths through one point: a single three-way event at t=0.5, x=1.
third = 1.0 / 3.0
trace(
    "triple simultaneous meet",
    Scenario.from_arrays(
        [third, third, third], [[0.0], [1.0], [2.0]], [[2.0], [0.0], [-2.0]]
    ),
)

# A two-stage cascade: the left pair merges first, the merged cluster
# then absorbs the third particle at t=1.3.
res = trace(
    "two-stage cascade",
    Scenario.from_arrays(
        [0.5, 0.3, 0.2], [[0.0], [1.0], [2.0]], [[1.0], [-1.0], [-1.0]]
    ),
)

print("\nsampled particle positions (columns = particles):")
for t in np.linspace(0.0, 2.0, 9):
    P, _ = res.states_at([t])
    row = "  ".join(f"{v:+.4f}" for v in P[0, :, 0])
    print(f"  t={t:.2f}:  {row}")
