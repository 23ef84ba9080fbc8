"""Total variation of cluster velocity histories.

Each particle's velocity along its sticky trajectory is a right-continuous
step function of time with finitely many jumps (one per merge it takes
part in).  For such paths the total variation is simply the sum of jump
magnitudes, and the mass-weighted average over all particles admits the
a-priori bound

    sum_i m_i V(velocity_i) <= 2 * max_{i,j} |v_i(0) - v_j(0)|

which the checkers in this module make testable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Trajectory

# Jumps smaller than this (Euclidean norm) are treated as float residue
# and dropped when extracting velocity paths.
JUMP_DROP_TOL = 1e-13


@dataclass(eq=False)
class VelocityPath:
    """Right-continuous step function of time, vector valued.

    n jump times come with n+1 values; value k rules on
    [jump_times[k-1], jump_times[k]) with the obvious conventions at the
    ends.  Consecutive values differ by construction.
    """

    jump_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.jump_times = np.asarray(self.jump_times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.shape[0] != self.jump_times.shape[0] + 1:
            raise ValueError("need exactly one more value than jump times")
        if np.any(np.diff(self.jump_times) <= 0):
            raise ValueError("jump times must be strictly increasing")

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def eval(self, t):
        """Value at time(s) t, right-continuous at jumps."""
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.jump_times, t, side="right")
        return self.values[idx]


def velocity_path(traj: Trajectory) -> VelocityPath:
    """Extract the step function t -> velocity from a trajectory.

    Breakpoints that did not change the velocity by more than
    JUMP_DROP_TOL in norm are dropped, so merge residue does not create
    spurious jumps.
    """
    times = []
    values = [traj.velocities[0]]
    for k in range(1, traj.times.shape[0]):
        v = traj.velocities[k]
        if np.linalg.norm(v - values[-1]) >= JUMP_DROP_TOL:
            times.append(traj.times[k])
            values.append(v)
    return VelocityPath(np.array(times), np.array(values))


def total_variation(path: VelocityPath) -> float:
    """Sum of Euclidean jump sizes; 0 for constant paths."""
    if path.jump_times.shape[0] == 0:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(path.values, axis=0), axis=1)))


def grid_variation(path: VelocityPath, grid) -> float:
    """Variation of the path sampled on a finite time grid.

    This is the partition sum sup defining the variation, restricted to
    partitions drawn from `grid`; it never exceeds total_variation and
    reaches it once the grid separates all jumps.
    """
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    vals = path.eval(grid)
    return float(np.sum(np.linalg.norm(np.diff(vals, axis=0), axis=1)))


def mass_avg_variation(result, masses=None) -> float:
    """Mass-weighted average of the per-particle velocity variations.

    Computed over the merge forest: each merge edge child -> parent
    contributes (mass carried by the child) * |velocity jump|, which
    equals sum_i m_i V(velocity_i) without walking each particle chain.
    Jumps below JUMP_DROP_TOL are dropped, matching velocity_path.
    """
    f = result.forest
    if masses is not None:
        masses = np.asarray(masses, dtype=np.float64)
        if masses.shape[0] != result.n:
            raise ValueError("masses must align with the particle count")
        edge_mass = np.empty(len(f.born))
        edge_mass[: result.n] = masses
        for cid in range(result.n, len(f.born)):
            edge_mass[cid] = np.sum(edge_mass[f.children_of(cid)])
    else:
        edge_mass = f.mass
    has_parent = f.parent >= 0
    child = np.flatnonzero(has_parent)
    if child.size == 0:
        return 0.0
    jumps = np.linalg.norm(f.vel[f.parent[child]] - f.vel[child], axis=1)
    jumps[jumps < JUMP_DROP_TOL] = 0.0
    return float(np.sum(edge_mass[child] * jumps))


def velocity_spread(velocities) -> float:
    """Largest pairwise Euclidean distance among initial velocities."""
    v = np.asarray(velocities, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    n, d = v.shape
    if n <= 1:
        return 0.0
    if d == 1:
        return float(v[:, 0].max() - v[:, 0].min())
    if n > 2000:
        # exact diameter via the convex hull; interior points cannot attain it
        from scipy.spatial import ConvexHull

        try:
            v = v[ConvexHull(v).vertices]
            n = v.shape[0]
        except Exception:
            pass  # degenerate hull (collinear data): fall through to pairwise
    diff = v[:, None, :] - v[None, :, :]
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max()))


def variation_bound(scenario) -> float:
    """The a-priori bound 2 * max pairwise initial velocity distance."""
    return 2.0 * velocity_spread(scenario.velocities)
