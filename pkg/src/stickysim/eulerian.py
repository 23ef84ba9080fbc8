"""Field-level views of a particle flow and the identities they satisfy.

A simulation gives Lagrangian trajectories; this module rebuilds the
measure-valued density (atoms at cluster positions) and velocity field,
then checks the structural identities of perfectly inelastic dynamics:

  * the averaging property: g-weighted momentum at time t is unchanged
    when each particle's current velocity is swapped for an earlier one,
  * monotonicity of convex velocity functionals (kinetic energy first),
  * weak residuals of the mass and momentum balance laws against smooth
    compactly supported test functions,
  * the one-sided Lipschitz (entropy) bound and the scaled-diameter
    contraction property, both specific to the line.

Checkers return a worst signed violation or residual magnitude; callers
compare against their own tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    COINCIDENCE_GRID,
    AtomicMeasure,
    DimensionError,
    DomainError,
    QuadratureBudgetExceeded,
)

EVENT_PAD = 1e-7  # grids sample this close to either side of each event


# ---------------------------------------------------------------------------
# Eulerian slices


@dataclass(eq=False)
class EulerianSlice:
    """Snapshot of the flow at one time: mass atoms plus their velocities.

    velocities[k] belongs to the atom at rho.points[k]; coincident
    particles share a cluster, hence a velocity, so the field is well
    defined on the support.
    """

    time: float
    rho: AtomicMeasure
    velocities: np.ndarray

    def velocity_at(self, x):
        """Velocity of the atom sitting at x (exact match on a 1e-12 grid)."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        key = tuple(np.round(x / COINCIDENCE_GRID).astype(np.int64))
        idx = self._index.get(key)
        if idx is None:
            raise ValueError("no atom at the given point; field is undefined off-support")
        return self.velocities[idx]

    def __post_init__(self):
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        keys = np.round(self.rho.points / COINCIDENCE_GRID).astype(np.int64)
        self._index = {tuple(k): i for i, k in enumerate(keys)}


def slice_at(result, t: float) -> EulerianSlice:
    """Atoms (cluster mass at cluster position) and velocities at time t."""
    if t < 0:
        raise DomainError("slices exist for t >= 0 only")
    f = result.forest
    ids = result.cluster_ids_at(t)
    pts = f.pos0[ids] + (t - f.born[ids])[:, None] * f.vel[ids]
    weights = f.mass[ids].copy()
    vels = f.vel[ids].copy()
    # collapse atoms that coincide on the exact grid (cannot happen for
    # distinct live clusters, but keeps the slice canonical regardless)
    keys = np.round(pts / COINCIDENCE_GRID).astype(np.int64)
    seen = {}
    keep, wsum = [], []
    for i, k in enumerate(keys):
        key = tuple(k)
        j = seen.get(key)
        if j is None:
            seen[key] = len(keep)
            keep.append(i)
            wsum.append([weights[i]])
        else:
            if np.linalg.norm(vels[keep[j]] - vels[i]) > COINCIDENCE_GRID:
                raise ValueError("coincident atoms carry distinct velocities")
            wsum[j].append(weights[i])
    if len(keep) != len(keys):
        weights = np.array([math.fsum(w) for w in wsum])
        pts = pts[keep]
        vels = vels[keep]
    return EulerianSlice(float(t), AtomicMeasure(weights, pts), vels)


def momentum(result, times) -> np.ndarray:
    """Total momentum vector at each time, shape (len(times), d)."""
    _, V = result.states_at(times)
    return np.einsum("i,tid->td", result.scenario.masses, V)


def kinetic_energy(result, times) -> np.ndarray:
    """Total kinetic energy at each time, shape (len(times),)."""
    _, V = result.states_at(times)
    return 0.5 * np.einsum("i,tid,tid->t", result.scenario.masses, V, V)


def time_grid(result, points: int = 41) -> np.ndarray:
    """Sampling grid: uniform base plus event times and event times +- pad.

    The interesting behavior concentrates at events, so the grid brackets
    each one closely from both sides.
    """
    h = result.scenario.horizon
    ev = result.events.times
    parts = [np.linspace(0.0, h, points), ev, ev - EVENT_PAD, ev + EVENT_PAD]
    grid = np.concatenate(parts)
    return np.unique(np.clip(grid, 0.0, h))


# ---------------------------------------------------------------------------
# Averaging property


def averaging_maps(d: int):
    """Ten fixed smooth vector maps R^d -> R^d used by the averaging check."""
    c = np.linspace(0.3, 1.1, d)

    return [
        ("const", lambda x: np.ones_like(x)),
        ("identity", lambda x: x),
        ("square", lambda x: x * x),
        ("cube", lambda x: x ** 3),
        ("sin", lambda x: np.sin(x)),
        ("cos_sum", lambda x: np.repeat(np.cos(x.sum(-1))[..., None], x.shape[-1], -1)),
        ("tanh", lambda x: np.tanh(x)),
        ("bump", lambda x: np.repeat(
            np.prod((1.0 - np.minimum(x * x, 1.0)) ** 4, axis=-1)[..., None],
            x.shape[-1], -1)),
        ("odd_quad", lambda x: x * np.abs(x)),
        ("gauss_tilt", lambda x: x * np.exp(-(x * x).sum(-1))[..., None] + c),
    ]


def check_averaging(result, s: float, t: float, g) -> float:
    """|sum_i m_i g(x_i(t)) . v_i(t)  -  sum_i m_i g(x_i(t)) . v_i(s)|.

    Particles sharing a cluster at time t merged no later than t, so the
    cluster's momentum already aggregates their time-s momenta; the two
    sides agree for any map g whenever s <= t.
    """
    if not 0 <= s <= t:
        raise DomainError("averaging check needs 0 <= s <= t")
    P, V = result.states_at([s, t])
    m = result.scenario.masses
    gt = g(P[1])
    lhs = math.fsum((m * np.einsum("id,id->i", gt, V[1])).tolist())
    rhs = math.fsum((m * np.einsum("id,id->i", gt, V[0])).tolist())
    return abs(lhs - rhs)


def averaging_residuals(result, pairs, maps=None) -> float:
    """Worst averaging residual over (s, t) pairs x maps, batched.

    All states are computed in one sweep over the event log; returns the
    max of |LHS - RHS| over every combination.
    """
    maps = averaging_maps(result.d) if maps is None else maps
    pairs = [(float(s), float(t)) for s, t in pairs]
    for s, t in pairs:
        if not 0 <= s <= t:
            raise DomainError("averaging check needs 0 <= s <= t")
    times = sorted({u for p in pairs for u in p})
    pos = {u: k for k, u in enumerate(times)}
    P, V = result.states_at(times)
    m = result.scenario.masses
    worst = 0.0
    for _, g in maps:
        for s, t in pairs:
            gt = g(P[pos[t]])
            lhs = math.fsum((m * np.einsum("id,id->i", gt, V[pos[t]])).tolist())
            rhs = math.fsum((m * np.einsum("id,id->i", gt, V[pos[s]])).tolist())
            worst = max(worst, abs(lhs - rhs))
    return worst


# ---------------------------------------------------------------------------
# Convex monotonicity


def convex_family(d: int, seed: int = 0):
    """Five fixed convex functionals of velocity, vectorized over (n, d)."""
    c = np.random.default_rng(seed).uniform(-1.0, 1.0, d)

    return [
        ("energy", lambda v: (v * v).sum(-1)),
        ("speed", lambda v: np.sqrt((v * v).sum(-1))),
        ("max_component", lambda v: v.max(-1)),
        ("sum_exp", lambda v: np.exp(v).sum(-1)),
        ("shifted_speed", lambda v: np.sqrt(((v - c) ** 2).sum(-1))),
    ]


def check_convex_monotone(result, F, times) -> float:
    """Worst increase of sum_i m_i F(v_i(t)) between consecutive times.

    Nonpositive for convex F: merges replace member velocities by their
    mass average, which can only lower a convex functional (Jensen).
    """
    times = np.sort(np.asarray(times, dtype=np.float64))
    _, V = result.states_at(times)
    vals = F(V)
    totals = vals @ result.scenario.masses
    if totals.shape[0] < 2:
        return 0.0
    return float(np.max(np.diff(totals)))


# ---------------------------------------------------------------------------
# Test functions and weak residuals


def _bump(s):
    out = np.zeros_like(s)
    mask = np.abs(s) < 1.0
    u = s[mask]
    out[mask] = (1.0 - u * u) ** 4
    return out


def _dbump(s):
    out = np.zeros_like(s)
    mask = np.abs(s) < 1.0
    u = s[mask]
    out[mask] = -8.0 * u * (1.0 - u * u) ** 3
    return out


@dataclass(eq=False)
class SpaceTimeBump:
    """Compactly supported space-time bump, optionally vector valued.

    psi(x, t) = prod_k b((x_k - center_k)/radius_k) * b((t - t_center)/t_radius)
    with b(s) = (1 - s^2)^4 on |s| <= 1 and 0 outside, so psi is C^3 with
    compact support box center +- radius x [t_center - t_radius, t_center
    + t_radius].  A direction vector e turns it into the vector field
    psi * e.
    """

    center: np.ndarray
    radius: np.ndarray
    t_center: float
    t_radius: float
    direction: np.ndarray | None = None

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        self.radius = np.atleast_1d(np.asarray(self.radius, dtype=np.float64))
        if self.radius.shape != self.center.shape or np.any(self.radius <= 0):
            raise ValueError("radius must be positive and match center's shape")
        if self.t_radius <= 0:
            raise ValueError("t_radius must be positive")
        if self.direction is not None:
            self.direction = np.asarray(self.direction, dtype=np.float64)
            if self.direction.shape != self.center.shape:
                raise ValueError("direction must match the spatial dimension")

    @property
    def d(self) -> int:
        return self.center.shape[0]

    @property
    def kind(self) -> str:
        return "scalar" if self.direction is None else "vector"

    @property
    def t_support(self):
        return (self.t_center - self.t_radius, self.t_center + self.t_radius)

    def _space_parts(self, x):
        s = (x - self.center) / self.radius
        bx = _bump(s)
        dbx = _dbump(s) / self.radius
        return bx, dbx

    def value(self, x, t):
        """psi(x, t); x has shape (..., d), t broadcastable to (...)."""
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        bx, _ = self._space_parts(x)
        gate = _bump((t - self.t_center) / self.t_radius)
        return bx.prod(-1) * gate

    def dt(self, x, t):
        """Time derivative of psi at (x, t)."""
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        bx, _ = self._space_parts(x)
        dgate = _dbump((t - self.t_center) / self.t_radius) / self.t_radius
        return bx.prod(-1) * dgate

    def grad(self, x, t):
        """Spatial gradient of psi at (x, t), shape (..., d)."""
        x = np.asarray(x, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        bx, dbx = self._space_parts(x)
        gate = _bump((t - self.t_center) / self.t_radius)
        d = self.d
        loo = np.empty_like(bx)
        for k in range(d):
            cols = [j for j in range(d) if j != k]
            loo[..., k] = bx[..., cols].prod(-1) if cols else 1.0
        return dbx * loo * gate[..., None]


def random_test_functions(result, count: int, seed: int, vector: bool = False):
    """Seeded bumps whose boxes overlap the busy region of the flow.

    Supports always end strictly before the horizon so the no-boundary
    telescoping identity applies.
    """
    rng = np.random.default_rng(seed)
    f = result.forest
    h = result.scenario.horizon
    lo = f.pos0.min(axis=0)
    hi = f.pos0.max(axis=0)
    span = np.maximum(hi - lo, 1.0)
    out = []
    for _ in range(count):
        center = rng.uniform(lo - 0.2 * span, hi + 0.2 * span)
        radius = rng.uniform(0.2, 1.0, result.d) * span
        t_center = rng.uniform(-0.1 * h, 0.8 * h)
        t_radius = rng.uniform(0.05 * h, 0.5 * h)
        t_radius = min(t_radius, 0.999 * (h - t_center))  # end before horizon
        direction = None
        if vector:
            direction = rng.normal(size=result.d)
            direction /= np.linalg.norm(direction)
        out.append(SpaceTimeBump(center, radius, float(t_center), float(t_radius), direction))
    return out


def _node_pieces(test, born, end):
    """Per-node integration windows clipped to the test's time support."""
    t_lo, t_hi = test.t_support
    a = np.maximum(born, max(t_lo, 0.0))
    b = np.minimum(end, t_hi)
    return a, b


def _split_at_crossings(test, nodes, a, b, pos0, vel, born):
    """Subdivide [a, b] per node at spatial support-box crossings.

    Inside each produced piece the integrand along the node's affine
    path is one fixed polynomial (or identically zero), so fixed-order
    Gauss-Legendre integrates it exactly.
    """
    d = test.d
    n = nodes.shape[0]
    cand = np.full((n, 2 * d), np.inf)
    for k in range(d):
        vk = vel[nodes, k]
        moving = vk != 0.0
        for side, edge in enumerate((test.center[k] - test.radius[k],
                                     test.center[k] + test.radius[k])):
            tt = np.full(n, np.inf)
            tt[moving] = born[nodes][moving] + (edge - pos0[nodes, k][moving]) / vk[moving]
            cand[:, 2 * k + side] = tt
    inside = (cand > a[:, None]) & (cand < b[:, None])
    cand = np.where(inside, cand, b[:, None])
    bounds = np.sort(np.concatenate([a[:, None], cand, b[:, None]], axis=1), axis=1)
    lo = bounds[:, :-1].ravel()
    hi = bounds[:, 1:].ravel()
    pidx = np.repeat(nodes, bounds.shape[1] - 1)
    keep = hi > lo
    return lo[keep], hi[keep], pidx[keep]


def _gl_integrate(test, lo, hi, pidx, pos0, vel, born, mass, xi, wq, factor):
    """Gauss-Legendre sum of mass * (dt psi + v . grad psi) * factor."""
    if lo.shape[0] == 0:
        return 0.0
    half = 0.5 * (hi - lo)
    t = lo[:, None] + half[:, None] * (xi[None, :] + 1.0)
    x = pos0[pidx][:, None, :] + (t - born[pidx][:, None])[:, :, None] * vel[pidx][:, None, :]
    integrand = test.dt(x, t) + np.einsum("pqd,pd->pq", test.grad(x, t), vel[pidx])
    piece = half * (integrand @ wq)
    return math.fsum((mass[pidx] * factor[pidx] * piece).tolist())


def weak_residuals(result, tests, budget: float | None = None):
    """Max |weak-form residual| of the mass and momentum balance laws.

    Scalar tests probe the mass equation, vector tests the momentum
    equation; each residual couples the space-time integral against the
    time-0 boundary term and vanishes identically for exact inelastic
    dynamics.  Returns (mass_residual, momentum_residual), the max over
    tests of each kind (0.0 where a kind is absent).

    Integration runs over merge-forest nodes (every particle inside a
    cluster shares its path, weighted by cluster mass), subdivided so
    each piece is polynomial, with a quadrature order exact for the bump
    degree.  A halving pass guards the result; disagreement beyond the
    budget raises QuadratureBudgetExceeded.
    """
    if budget is None:
        budget = result.scenario.tolerances.residual_quad
    f = result.forest
    h = result.scenario.horizon
    born = f.born
    end = np.minimum(np.where(np.isinf(f.death), h, f.death), h)
    mass = f.mass
    n_nodes = born.shape[0]
    npts = 4 * (result.d + 1) + 2
    xi, wq = np.polynomial.legendre.leggauss(npts)
    x0 = f.pos0[: result.n]
    v0 = f.vel[: result.n]
    m0 = result.scenario.masses

    worst = {"scalar": 0.0, "vector": 0.0}
    for test in tests:
        if test.d != result.d:
            raise DimensionError("test function dimension does not match the flow")
        if test.t_support[1] > h:
            raise ValueError("test support must end before the horizon")
        if test.kind == "scalar":
            factor = np.ones(n_nodes)
            initial = math.fsum((m0 * test.value(x0, 0.0)).tolist())
        else:
            factor = f.vel @ test.direction
            initial = math.fsum((m0 * test.value(x0, 0.0) * (v0 @ test.direction)).tolist())
        a, b = _node_pieces(test, born, end)
        nodes = np.flatnonzero(b > a)
        lo, hi, pidx = _split_at_crossings(test, nodes, a[nodes], b[nodes], f.pos0, f.vel, born)
        coarse = _gl_integrate(test, lo, hi, pidx, f.pos0, f.vel, born, mass, xi, wq, factor)
        mid = 0.5 * (lo + hi)
        lo2 = np.concatenate([lo, mid])
        hi2 = np.concatenate([mid, hi])
        pidx2 = np.concatenate([pidx, pidx])
        fine = _gl_integrate(test, lo2, hi2, pidx2, f.pos0, f.vel, born, mass, xi, wq, factor)
        if abs(fine - coarse) > 0.1 * budget:
            raise QuadratureBudgetExceeded(
                f"quadrature disagreement {abs(fine - coarse):.3e} exceeds the budget"
            )
        worst[test.kind] = max(worst[test.kind], abs(fine + initial))
    return worst["scalar"], worst["vector"]


# ---------------------------------------------------------------------------
# Line-only inequalities


def check_entropy_1d(result, times) -> float:
    """Worst one-sided Lipschitz violation over particle pairs and times.

    At each t > 0 every pair must satisfy
        (v_i - v_j)(x_i - x_j) <= (x_i - x_j)^2 / t
    and merged pairs sit exactly at equality 0 <= 0.
    """
    if result.d != 1:
        raise DimensionError("the entropy bound is one-dimensional")
    times = np.asarray(times, dtype=np.float64)
    if np.any(times <= 0):
        raise DomainError("entropy grid times must be positive")
    P, V = result.states_at(times)
    n = result.n
    if n < 2:
        return 0.0
    iu, ju = np.triu_indices(n, 1)
    worst = -np.inf
    for k in range(times.shape[0]):
        x = P[k, :, 0]
        v = V[k, :, 0]
        dx = x[iu] - x[ju]
        dv = v[iu] - v[ju]
        vals = dv * dx - dx * dx / times[k]
        worst = max(worst, float(vals.max()))
    return worst


def check_qspp_1d(result, s: float, t: float) -> float:
    """Worst violation of scaled-diameter contraction between s and t.

    For 0 < s <= t every pair must satisfy |x_i(t)-x_j(t)|/t <=
    |x_i(s)-x_j(s)|/s; returns max over pairs of LHS - RHS.
    """
    if result.d != 1:
        raise DimensionError("the contraction property is one-dimensional")
    if s <= 0:
        raise DomainError("contraction check needs s > 0")
    if t < s:
        raise DomainError("contraction check needs s <= t")
    P, _ = result.states_at([s, t])
    n = result.n
    if n < 2:
        return 0.0
    iu, ju = np.triu_indices(n, 1)
    gap_s = np.abs(P[0, iu, 0] - P[0, ju, 0])
    gap_t = np.abs(P[1, iu, 0] - P[1, ju, 0])
    return float((gap_t / t - gap_s / s).max())


def qspp_grid_violation(result, times) -> float:
    """Max pairwise contraction violation over consecutive grid times."""
    if result.d != 1:
        raise DimensionError("the contraction property is one-dimensional")
    times = np.sort(np.asarray(times, dtype=np.float64))
    if np.any(times <= 0):
        raise DomainError("contraction grid times must be positive")
    P, _ = result.states_at(times)
    n = result.n
    if n < 2 or times.shape[0] < 2:
        return 0.0
    iu, ju = np.triu_indices(n, 1)
    worst = -np.inf
    prev = np.abs(P[0, iu, 0] - P[0, ju, 0]) / times[0]
    for k in range(1, times.shape[0]):
        cur = np.abs(P[k, iu, 0] - P[k, ju, 0]) / times[k]
        worst = max(worst, float((cur - prev).max()))
        prev = cur
    return worst
