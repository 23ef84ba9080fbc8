"""Shared domain objects for the sticky particle toolkit.

Everything downstream (engines, checkers, transport utilities) speaks in
terms of the types defined here: particle initial data, scenarios with
their tolerance budgets, piecewise-affine trajectories, clusters, and
finite atomic measures.  All numeric payloads are float64 numpy arrays;
scenarios hold their particle data columnar so million-particle systems
stay cheap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

# Coincidence grid used when canonicalizing atomic measures.
COINCIDENCE_GRID = 1e-12

# Mass bookkeeping must stay exact to this budget.
MASS_TOL = 1e-12

# Relative budget for breakpoint continuity along a trajectory.
CONTINUITY_TOL = 1e-9


class DegenerateInput(ValueError):
    """Initial data the engine refuses: e.g. coincident starting positions."""


class ToleranceConflict(RuntimeError):
    """Two distinct events landed inside one grouping window at spatially
    separated locations while sharing a cluster.  Cannot happen in exact
    arithmetic; the engine signals instead of silently picking a side."""


class DimensionError(ValueError):
    """An operation restricted to a specific ambient dimension was called
    with data of another dimension."""


class DomainError(ValueError):
    """A time or parameter outside the mathematical domain of a check."""


class QuadratureBudgetExceeded(RuntimeError):
    """Adaptive refinement could not push a quadrature result below the
    requested residual budget."""


class UnboundedSupport(ValueError):
    """A continuum recipe does not have compact support."""


@dataclass(frozen=True)
class EngineTolerances:
    """Numerical tolerance budget for the event engine and checkers.

    Attributes
    ----------
    t_group : float
        Events closer in time than this are treated as one instant.
    x_hit : float
        Spatial coincidence threshold for collision detection.
    residual_quad : float
        Budget for weak-form residual quadrature.
    """

    t_group: float = 1e-9
    x_hit: float = 1e-9
    residual_quad: float = 1e-8

    def __post_init__(self):
        for name in ("t_group", "x_hit", "residual_quad"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"tolerance {name} must be positive")


@dataclass(frozen=True, eq=False)
class ParticleInit:
    """Initial condition of a single particle: mass, position, velocity."""

    mass: float
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=np.float64)))
        object.__setattr__(self, "v", np.atleast_1d(np.asarray(self.v, dtype=np.float64)))
        if not (self.mass > 0):
            raise ValueError("particle mass must be positive")
        if self.x.ndim != 1 or self.v.ndim != 1 or self.x.shape != self.v.shape:
            raise ValueError("x and v must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("positions and velocities must be finite")

    @property
    def d(self) -> int:
        return self.x.shape[0]


class Scenario:
    """A finite particle system plus simulation horizon and tolerances.

    Particle data is stored columnar (masses, positions, velocities).
    Masses must sum to 1 within 1e-12; initial positions must be pairwise
    distinct under exact comparison, otherwise DegenerateInput is raised.

    Parameters
    ----------
    particles : list of ParticleInit
    horizon : float
        Final simulation time, > 0.
    tolerances : EngineTolerances
    """

    def __init__(self, particles, horizon=2.0, tolerances=None):
        particles = list(particles)
        if not particles:
            raise ValueError("scenario needs at least one particle")
        d = particles[0].d
        for p in particles:
            if p.d != d:
                raise DimensionError("all particles must share one ambient dimension")
        masses = np.array([p.mass for p in particles], dtype=np.float64)
        positions = np.stack([p.x for p in particles])
        velocities = np.stack([p.v for p in particles])
        self._init_from_arrays(masses, positions, velocities, horizon, tolerances)

    @classmethod
    def from_arrays(cls, masses, positions, velocities, horizon=2.0, tolerances=None):
        """Build a scenario directly from columnar arrays.

        positions and velocities have shape (n, d) (or (n,) for the line);
        this avoids materializing n ParticleInit objects.
        """
        self = cls.__new__(cls)
        masses = np.asarray(masses, dtype=np.float64)
        positions = np.asarray(positions, dtype=np.float64)
        velocities = np.asarray(velocities, dtype=np.float64)
        if positions.ndim == 1:
            positions = positions[:, None]
        if velocities.ndim == 1:
            velocities = velocities[:, None]
        self._init_from_arrays(masses, positions, velocities, horizon, tolerances)
        return self

    def _init_from_arrays(self, masses, positions, velocities, horizon, tolerances):
        self.horizon = float(horizon)
        self.tolerances = tolerances if tolerances is not None else EngineTolerances()
        if not (self.horizon > 0):
            raise ValueError("horizon must be positive")
        n = masses.shape[0]
        if n == 0:
            raise ValueError("scenario needs at least one particle")
        if positions.shape[0] != n or velocities.shape != positions.shape:
            raise ValueError("masses, positions, velocities must align on n")
        if positions.ndim != 2:
            raise ValueError("positions must be (n, d)")
        if not np.all(masses > 0):
            raise ValueError("particle masses must be positive")
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(velocities))):
            raise ValueError("positions and velocities must be finite")
        self.masses = masses
        self.positions = positions
        self.velocities = velocities
        total = math.fsum(masses.tolist())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses must sum to 1 within {MASS_TOL}, got {total!r}")
        self._check_distinct_positions()

    def _check_distinct_positions(self):
        # Exact duplicate test; sort rows so the scan is O(n log n).
        pos = self.positions
        order = np.lexsort(pos.T[::-1])
        sorted_pos = pos[order]
        dup = np.all(sorted_pos[1:] == sorted_pos[:-1], axis=1)
        if np.any(dup):
            k = int(np.argmax(dup))
            i, j = int(order[k]), int(order[k + 1])
            raise DegenerateInput(
                f"particles {min(i, j)} and {max(i, j)} share the initial position "
                f"{sorted_pos[k].tolist()}"
            )

    @property
    def particles(self):
        """Per-particle view of the columnar data (constructed on access)."""
        return [
            ParticleInit(float(self.masses[i]), self.positions[i], self.velocities[i])
            for i in range(self.n)
        ]

    @property
    def n(self) -> int:
        return self.masses.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    def to_dict(self) -> dict:
        return {
            "particles": [
                {
                    "m": float(self.masses[i]),
                    "x": self.positions[i].tolist(),
                    "v": self.velocities[i].tolist(),
                }
                for i in range(self.n)
            ],
            "horizon": self.horizon,
            "tolerances": {
                "t_group": self.tolerances.t_group,
                "x_hit": self.tolerances.x_hit,
                "residual_quad": self.tolerances.residual_quad,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            raw = data["particles"]
            masses = np.array([p["m"] for p in raw], dtype=np.float64)
            positions = np.array([p["x"] for p in raw], dtype=np.float64)
            velocities = np.array([p["v"] for p in raw], dtype=np.float64)
            horizon = data.get("horizon", 2.0)
            tol = data.get("tolerances", {})
            tolerances = EngineTolerances(
                t_group=tol.get("t_group", 1e-9),
                x_hit=tol.get("x_hit", 1e-9),
                residual_quad=tol.get("residual_quad", 1e-8),
            )
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise ValueError(f"malformed scenario data: {exc}") from exc
        if positions.ndim == 1:
            positions = positions[:, None]
            velocities = velocities[:, None]
        return cls.from_arrays(
            masses, positions, velocities, horizon=horizon, tolerances=tolerances
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed scenario JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True, eq=False)
class Cluster:
    """A maximal group of particles moving together from born_at onward.

    position is the cluster position at time born_at; motion afterwards is
    affine with the stored velocity.  mass is recomputed from the member
    particles, never accumulated across merges.
    """

    members: frozenset
    mass: float
    position: np.ndarray
    velocity: np.ndarray
    born_at: float

    def position_at(self, t: float) -> np.ndarray:
        return self.position + (t - self.born_at) * self.velocity


@dataclass(eq=False)
class Trajectory:
    """Piecewise-affine path of one particle.

    Breakpoints are (time, position, right velocity); the path is affine
    between breakpoints and extends affinely beyond the last one.  The
    velocity at a breakpoint is the right derivative.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.positions.ndim == 1:
            self.positions = self.positions[:, None]
        if self.velocities.ndim == 1:
            self.velocities = self.velocities[:, None]
        k = self.times.shape[0]
        if self.positions.shape[0] != k or self.velocities.shape[0] != k:
            raise ValueError("breakpoint arrays must share their leading length")
        if k == 0 or self.times[0] != 0.0:
            raise ValueError("trajectories start at time 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if k > 1:
            dt = np.diff(self.times)[:, None]
            predicted = self.positions[:-1] + dt * self.velocities[:-1]
            scale = 1.0 + np.abs(self.positions[1:])
            if np.any(np.abs(predicted - self.positions[1:]) > CONTINUITY_TOL * scale):
                raise ValueError("breakpoint positions break continuity")

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    def eval(self, t):
        """Position and right velocity at time(s) t >= 0."""
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.times) - 1)
        dt = t - self.times[idx]
        pos = self.positions[idx] + dt[..., None] * self.velocities[idx]
        vel = self.velocities[idx]
        return pos, vel


def eval_trajectory(traj: Trajectory, t):
    """Evaluate a trajectory at time(s) t: returns (position, right velocity).

    At a breakpoint the velocity of the later segment is reported, matching
    the right-derivative convention.
    """
    if np.any(np.asarray(t) < 0):
        raise DomainError("trajectories are defined for t >= 0")
    return traj.eval(t)


@dataclass(eq=False)
class AtomicMeasure:
    """Finitely supported measure: positive weights summing to 1 on points.

    points has shape (n, m).  A 1-d points argument is treated as n points
    on the line.
    """

    weights: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.points.ndim != 2 or self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("points must be (n, m) aligned with n weights")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        total = math.fsum(self.weights.tolist())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"weights must sum to 1 within {MASS_TOL}, got {total!r}")

    @property
    def n_atoms(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]


def canonicalize(measure: AtomicMeasure) -> AtomicMeasure:
    """Merge atoms sitting at identical points.

    Identity means exact equality after rounding each coordinate to the
    1e-12 grid.  Weights of merged atoms are summed with fsum; the first
    atom of each group donates the representative point, so the operation
    is idempotent and does not perturb already-distinct measures.
    """
    keys = np.round(measure.points / COINCIDENCE_GRID).astype(np.int64)
    seen = {}
    rep_idx = []
    groups = []
    for i in range(measure.n_atoms):
        key = tuple(keys[i])
        j = seen.get(key)
        if j is None:
            seen[key] = len(rep_idx)
            rep_idx.append(i)
            groups.append([i])
        else:
            groups[j].append(i)
    if len(rep_idx) == measure.n_atoms:
        return AtomicMeasure(measure.weights.copy(), measure.points.copy())
    weights = np.array(
        [math.fsum(measure.weights[g].tolist()) for g in groups], dtype=np.float64
    )
    points = measure.points[rep_idx]
    return AtomicMeasure(weights, points)
