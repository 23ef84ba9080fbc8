"""Event-driven construction of sticky particle flows.

Particles move affinely until they meet; meeting groups merge into a
single cluster whose velocity is the mass average of the incoming ones,
so momentum is conserved and kinetic energy never increases.  Two engines
share one result representation:

* ``simulate``          general ambient dimension, all-pairs prediction
* ``simulate_1d_fast``  line case, neighbor-only prediction (order is
  preserved on the line, so only adjacent clusters can meet first)

Results are stored as a merge forest: every original particle is a leaf,
every collision creates a node.  The forest and the event log are kept
columnar and per-particle trajectories are read off on demand, which
keeps million-particle runs inside a small memory budget.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from array import array
from dataclasses import dataclass

import numpy as np

from .core import (
    Cluster,
    DimensionError,
    Scenario,
    ToleranceConflict,
    Trajectory,
)

log = logging.getLogger(__name__)

try:
    from . import _fast1d
except ImportError:
    # numba not installed; the pure-Python line engine is the only path
    _fast1d = None


@dataclass(frozen=True, eq=False)
class CollisionEvent:
    """One instant at which one or more cluster groups merge.

    groups holds the cluster ids consumed per merge point, new_ids the
    cluster created per group.  post_velocities[g] is the mass average of
    the group's incoming velocities, locations[g] the meet point.
    """

    time: float
    groups: tuple
    new_ids: tuple
    locations: np.ndarray
    pre_velocities: tuple
    post_velocities: np.ndarray


class EventLog:
    """Columnar event sequence; items materialize as CollisionEvent.

    Storage is flat: per-event group ranges, per-group child ranges.
    Supports len(), indexing, slicing, and iteration.
    """

    def __init__(self, d, times, ev_off, g_new, g_loc, g_post, g_child_off,
                 children, pre):
        self.d = d
        self.times = times
        self._ev_off = ev_off
        self._g_new = g_new
        self._g_loc = g_loc
        self._g_post = g_post
        self._g_child_off = g_child_off
        self._children = children
        self._pre = pre

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        k = int(k)
        if k < 0:
            k += len(self)
        if not (0 <= k < len(self)):
            raise IndexError("event index out of range")
        g0, g1 = int(self._ev_off[k]), int(self._ev_off[k + 1])
        groups = []
        pre = []
        for g in range(g0, g1):
            c0, c1 = int(self._g_child_off[g]), int(self._g_child_off[g + 1])
            groups.append(tuple(int(c) for c in self._children[c0:c1]))
            pre.append(self._pre[c0:c1])
        return CollisionEvent(
            time=float(self.times[k]),
            groups=tuple(groups),
            new_ids=tuple(int(i) for i in self._g_new[g0:g1]),
            locations=self._g_loc[g0:g1],
            pre_velocities=tuple(pre),
            post_velocities=self._g_post[g0:g1],
        )

    def new_ids_of(self, k) -> np.ndarray:
        """New cluster ids created by event k (fast path, no materializing)."""
        return self._g_new[int(self._ev_off[k]):int(self._ev_off[k + 1])]

    @property
    def group_count(self) -> int:
        return len(self._g_new)


class _EventBuilder:
    def __init__(self, d):
        self.d = d
        self.times = array("d")
        self.ev_off = array("q", [0])
        self.g_new = array("q")
        self.g_loc = array("d")
        self.g_post = array("d")
        self.g_child_off = array("q", [0])
        self.children = array("q")
        self.pre = array("d")

    def add_group(self, new_id, cids, loc_flat, post_flat, pre_flat):
        self.g_new.append(new_id)
        self.g_loc.extend(loc_flat)
        self.g_post.extend(post_flat)
        self.children.extend(cids)
        self.g_child_off.append(len(self.children))
        self.pre.extend(pre_flat)

    def end_event(self, t):
        self.times.append(t)
        self.ev_off.append(len(self.g_new))

    def build(self) -> EventLog:
        d = self.d

        def as_np(a, dtype):
            if len(a) == 0:
                return np.empty(0, dtype=dtype)
            return np.frombuffer(a, dtype=dtype).copy()

        g = len(self.g_new)
        c = len(self.children)
        return EventLog(
            d=d,
            times=as_np(self.times, np.float64),
            ev_off=as_np(self.ev_off, np.int64),
            g_new=as_np(self.g_new, np.int64),
            g_loc=as_np(self.g_loc, np.float64).reshape(g, d),
            g_post=as_np(self.g_post, np.float64).reshape(g, d),
            g_child_off=as_np(self.g_child_off, np.int64),
            children=as_np(self.children, np.int64),
            pre=as_np(self.pre, np.float64).reshape(c, d),
        )


class MergeForest:
    """Columnar merge forest: leaves 0..n-1 are particles, later ids are
    clusters created by events.  death[c] is the birth time of the cluster
    that absorbed c (inf while alive).  Children are stored flat with
    offsets; member particle index arrays are cached per cluster."""

    def __init__(self, n, d, born, pos0, vel, mass, parent, child_off, children,
                 members):
        self.n = n
        self.d = d
        self.born = born
        self.pos0 = pos0
        self.vel = vel
        self.mass = mass
        self.parent = parent
        self.child_off = child_off
        self.children = children
        self.death = np.full(len(born), np.inf)
        has_parent = parent >= 0
        self.death[has_parent] = born[parent[has_parent]]
        self._members = members if members is not None else {}

    def __len__(self):
        return len(self.born)

    def children_of(self, cid: int) -> np.ndarray:
        return self.children[int(self.child_off[cid]):int(self.child_off[cid + 1])]

    def members_of(self, cid: int) -> np.ndarray:
        """Sorted particle indices below cluster cid."""
        cached = self._members.get(cid)
        if cached is not None:
            return cached
        if cid < self.n:
            out = np.array([cid], dtype=np.int64)
        else:
            leaves = []
            stack = [cid]
            while stack:
                c = stack.pop()
                kids = self.children_of(c)
                if len(kids):
                    stack.extend(int(k) for k in kids)
                else:
                    leaves.append(c)
            out = np.sort(np.array(leaves, dtype=np.int64))
        self._members[cid] = out
        return out


class _TrajectoryList:
    """Lazy sequence of per-particle trajectories over a result."""

    def __init__(self, result):
        self._result = result

    def __len__(self):
        return self._result.n

    def __getitem__(self, i):
        return self._result.trajectory(i)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


class SimulationResult:
    """Output of either engine: forest, event log, final flight state."""

    def __init__(self, scenario, forest, events, engine):
        self.scenario = scenario
        self.forest = forest
        self.events = events
        self.engine = engine

    @property
    def n(self):
        return self.scenario.n

    @property
    def d(self):
        return self.scenario.d

    @property
    def trajectories(self):
        return _TrajectoryList(self)

    def trajectory(self, i: int) -> Trajectory:
        f = self.forest
        chain = [i]
        p = f.parent[i]
        while p >= 0:
            chain.append(p)
            p = f.parent[p]
        idx = np.array(chain, dtype=np.int64)
        return Trajectory(f.born[idx], f.pos0[idx].copy(), f.vel[idx].copy())

    def members_of(self, cid: int) -> np.ndarray:
        return self.forest.members_of(cid)

    def cluster_ids_at(self, t: float) -> np.ndarray:
        """Ids of the clusters alive at time t (right-continuous)."""
        f = self.forest
        return np.flatnonzero((f.born <= t) & (f.death > t))

    def particle_cluster_ids(self, t: float) -> np.ndarray:
        """For each particle, the id of its cluster at time t."""
        f = self.forest
        out = np.arange(self.n, dtype=np.int64)
        stop = int(np.searchsorted(self.events.times, t, side="right"))
        for k in range(stop):
            for nid in self.events.new_ids_of(k):
                if f.born[nid] <= t:
                    out[f.members_of(int(nid))] = nid
        return out

    def states_at(self, times):
        """Positions and right velocities of all particles at given times.

        Returns arrays of shape (len(times), n, d).  Event handling is a
        single sweep, so times are internally sorted.
        """
        times = np.atleast_1d(np.asarray(times, dtype=np.float64))
        order = np.argsort(times, kind="stable")
        f = self.forest
        n, d = self.n, self.d
        pcur = np.arange(n, dtype=np.int64)
        P = np.empty((len(times), n, d))
        V = np.empty((len(times), n, d))
        ev_times = self.events.times
        n_events = len(ev_times)
        ei = 0
        for k in order:
            t = times[k]
            while ei < n_events and ev_times[ei] <= t:
                for nid in self.events.new_ids_of(ei):
                    pcur[f.members_of(int(nid))] = nid
                ei += 1
            born = f.born[pcur]
            P[k] = f.pos0[pcur] + (t - born)[:, None] * f.vel[pcur]
            V[k] = f.vel[pcur]
        return P, V

    @property
    def final_cluster_ids(self) -> np.ndarray:
        return np.flatnonzero(np.isinf(self.forest.death))

    @property
    def final_clusters(self):
        """Free-flight state after the last event, as Cluster objects."""
        f = self.forest
        out = []
        for cid in self.final_cluster_ids:
            out.append(
                Cluster(
                    members=frozenset(int(i) for i in f.members_of(int(cid))),
                    mass=float(f.mass[cid]),
                    position=f.pos0[cid].copy(),
                    velocity=f.vel[cid].copy(),
                    born_at=float(f.born[cid]),
                )
            )
        return out


def pair_collision_time(a: Cluster, b: Cluster, now: float, x_hit: float = 1e-9):
    """First meeting time of two clusters' affine extensions at or after now.

    Returns None when the paths never coincide.  On the line this solves
    one linear equation; in higher dimension the meet requires the
    closest-approach distance of the relative affine path to fall within
    x_hit, and the closest-approach time is returned.
    """
    pa = a.position_at(now)
    pb = b.position_at(now)
    dx = pb - pa
    dv = b.velocity - a.velocity
    if a.position.shape[0] == 1:
        if dv[0] == 0.0:
            return None
        t = now - dx[0] / dv[0]
        return float(t) if t >= now else None
    dv2 = float(dv @ dv)
    if dv2 == 0.0:
        return None
    tstar = now - float(dx @ dv) / dv2
    if tstar < now:
        return None
    miss = dx + (tstar - now) * dv
    if float(miss @ miss) <= x_hit * x_hit:
        return float(tstar)
    return None


class _UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, i):
        p = self.parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def _group_window(window, x_hit):
    """Partition window events into merge groups by meet-point proximity.

    window entries are (t, i, j, loc) with loc a d-vector.  Events whose
    locations coincide within x_hit form one group (transitive closure).
    A cluster claimed by two groups at separated locations means the
    grouping window conflated genuinely distinct events: that cannot
    happen in exact arithmetic, so it is signalled, never resolved.

    Returns a list of (cluster ids, group time) sorted by time then ids.
    """
    w = len(window)
    if w == 1:
        t, i, j, _ = window[0]
        return [((i, j) if i < j else (j, i), t)]
    uf = _UnionFind(w)
    for a in range(w):
        loc_a = window[a][3]
        for b in range(a + 1, w):
            delta = loc_a - window[b][3]
            if float(delta @ delta) <= x_hit * x_hit:
                uf.union(a, b)
    cluster_root = {}
    comp_events = {}
    for idx in range(w):
        t, i, j, _ = window[idx]
        root = uf.find(idx)
        comp_events.setdefault(root, []).append(idx)
        for c in (i, j):
            prev = cluster_root.setdefault(c, root)
            if prev != root:
                raise ToleranceConflict(
                    f"cluster {c} participates in two spatially separated events "
                    f"inside one grouping window (times near {t!r}); "
                    "tighten t_group or perturb the input"
                )
    groups = []
    for root, idxs in comp_events.items():
        tau = min(window[k][0] for k in idxs)
        cids = sorted({c for k in idxs for c in (window[k][1], window[k][2])})
        groups.append((tuple(cids), tau))
    groups.sort(key=lambda g: (g[1], g[0]))
    return groups


def _group_window_1d(window, x_hit):
    """Line version of window grouping with scalar locations.

    On the line the transitive closure of "within x_hit" is found by
    sorting locations and splitting where a consecutive gap exceeds x_hit.
    Semantics (component times, conflict detection, ordering) match
    ``_group_window``.
    """
    order = sorted(range(len(window)), key=lambda k: window[k][3])
    comps = [[order[0]]]
    prev = window[order[0]][3]
    for k in order[1:]:
        loc = window[k][3]
        if loc - prev > x_hit:
            comps.append([])
        comps[-1].append(k)
        prev = loc
    owner = {}
    groups = []
    for ci, comp in enumerate(comps):
        tau = min(window[k][0] for k in comp)
        cidset = {c for k in comp for c in (window[k][1], window[k][2])}
        for c in cidset:
            if owner.setdefault(c, ci) != ci:
                raise ToleranceConflict(
                    f"cluster {c} is claimed by two merge groups inside one "
                    f"grouping window (time near {tau!r}); tighten t_group or "
                    "perturb the input"
                )
        groups.append((tuple(sorted(cidset)), tau))
    groups.sort(key=lambda g: (g[1], g[0]))
    return groups


def _just_after(t: float) -> float:
    return float(np.nextafter(t, np.inf))


def simulate(scenario: Scenario) -> SimulationResult:
    """Run the general event engine in any ambient dimension.

    Collision times are predicted for every cluster pair and kept in a
    priority queue with lazy invalidation; merged groups get fresh
    predictions against all surviving clusters.  Events within t_group of
    the earliest pending time are processed as one instant; within such a
    window, meet points are clustered transitively within x_hit.  Any
    still-live cluster standing within x_hit of a meet point at the merge
    instant is coincident to tolerance and is absorbed into that merge.
    """
    n, d = scenario.n, scenario.d
    tol = scenario.tolerances
    t_group, x_hit = tol.t_group, tol.x_hit
    horizon = scenario.horizon
    masses0 = scenario.masses

    born = [0.0] * n
    pos0 = [scenario.positions[i] for i in range(n)]
    vel = [scenario.velocities[i] for i in range(n)]
    mass = [float(m) for m in masses0]
    parent = array("q", [-1]) * n
    child_off = array("q", [0] * (n + 1))
    children = array("q")
    members = [np.array([i], dtype=np.int64) for i in range(n)]
    alive = set(range(n))

    seq = itertools.count()
    heap = []

    def predict_against(cid, other_ids):
        """Push collision candidates of cid versus each id in other_ids."""
        if len(other_ids) == 0:
            return
        ids = np.asarray(other_ids, dtype=np.int64)
        P = np.stack([pos0[c] for c in ids])
        Vm = np.stack([vel[c] for c in ids])
        B = np.array([born[c] for c in ids])
        a_i = pos0[cid] - born[cid] * vel[cid]
        dx = (P - B[:, None] * Vm) - a_i
        dvm = Vm - vel[cid]
        lower = np.maximum(B, born[cid])
        if d == 1:
            dv1 = dvm[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                tstar = -dx[:, 0] / dv1
            ok = (dv1 != 0.0) & (tstar >= lower - t_group)
        else:
            dv2 = np.einsum("kd,kd->k", dvm, dvm)
            with np.errstate(divide="ignore", invalid="ignore"):
                tstar = -np.einsum("kd,kd->k", dx, dvm) / dv2
            miss = dx + tstar[:, None] * dvm
            dmin2 = np.einsum("kd,kd->k", miss, miss)
            feasible = (dv2 > 0.0) & (tstar >= lower - t_group)
            ok = feasible & (dmin2 <= x_hit * x_hit)
            for k in np.flatnonzero(feasible & ~ok & (dmin2 <= 4.0 * x_hit * x_hit)):
                log.warning(
                    "grazing pair: clusters %d and %d pass within (x_hit, 2*x_hit] "
                    "near t=%g; not merged",
                    cid, int(ids[k]), float(max(tstar[k], lower[k])),
                )
        for k in np.flatnonzero(ok):
            t = float(tstar[k])
            if t <= lower[k]:
                t = _just_after(float(lower[k]))
            if t <= horizon + t_group:
                heapq.heappush(heap, (t, next(seq), cid, int(ids[k])))

    for i in range(n - 1):
        predict_against(i, list(range(i + 1, n)))

    def position_at(c, t):
        return pos0[c] + (t - born[c]) * vel[c]

    builder = _EventBuilder(d)
    while heap:
        t0, _, a, b = heapq.heappop(heap)
        if a not in alive or b not in alive:
            continue
        if t0 > horizon:
            break
        window = [(t0, a, b, 0.5 * (position_at(a, t0) + position_at(b, t0)))]
        while heap and heap[0][0] <= t0 + t_group:
            t1, _, c, e = heapq.heappop(heap)
            if c in alive and e in alive:
                window.append((t1, c, e, 0.5 * (position_at(c, t1) + position_at(e, t1))))
        groups = _group_window(window, x_hit)
        claimed = {c for cids, _ in groups for c in cids}
        bystanders = [c for c in alive if c not in claimed]

        new_ids = []
        for cids, tau in groups:
            # Absorb bystanders standing within x_hit of the meet point:
            # they are coincident with the collision to tolerance.
            meet = position_at(cids[0], tau)
            extra = []
            for c in bystanders:
                delta = position_at(c, tau) - meet
                if float(delta @ delta) <= x_hit * x_hit:
                    if c in claimed:
                        raise ToleranceConflict(
                            f"cluster {c} is claimed by two merge groups inside "
                            f"one grouping window (time near {tau!r}); tighten "
                            "t_group or perturb the input"
                        )
                    extra.append(c)
            if extra:
                cids = tuple(sorted(cids + tuple(extra)))
                claimed.update(extra)

            ms = [mass[c] for c in cids]
            mtot = math.fsum(ms)
            p_new = np.empty(d)
            v_new = np.empty(d)
            for k in range(d):
                p_new[k] = math.fsum(
                    m * position_at(c, tau)[k] for m, c in zip(ms, cids)
                ) / mtot
                v_new[k] = math.fsum(m * vel[c][k] for m, c in zip(ms, cids)) / mtot
            mem_new = np.sort(np.concatenate([members[c] for c in cids]))
            m_new = float(np.sum(masses0[mem_new]))

            nid = len(born)
            pre_flat = []
            for c in cids:
                pre_flat.extend(vel[c].tolist())
            builder.add_group(nid, cids, p_new.tolist(), v_new.tolist(), pre_flat)
            born.append(tau)
            pos0.append(p_new)
            vel.append(v_new)
            mass.append(m_new)
            parent.append(-1)
            children.extend(cids)
            child_off.append(len(children))
            members.append(mem_new)
            for c in cids:
                parent[c] = nid
                alive.discard(c)
            new_ids.append(nid)
            alive.add(nid)
        builder.end_event(t0)
        fresh = set(new_ids)
        for nid in new_ids:
            others = [c for c in alive if c != nid and not (c in fresh and c > nid)]
            predict_against(nid, others)

    return _finish(scenario, born, pos0, vel, mass, parent, child_off, children,
                   members, builder, "general")


def simulate_1d_fast(scenario: Scenario, compiled=None) -> SimulationResult:
    """Line-specialized engine: only adjacent clusters are tracked.

    Sticky dynamics on the line preserve spatial order, so the first
    collision of any cluster is with a current neighbor; the queue holds
    one candidate per adjacent pair.  Grouping-window semantics, the merge
    rule, and the event log format match ``simulate``.

    compiled=None picks the numba kernel when available and falls back to
    the pure-Python loop otherwise; True requires the kernel, False forces
    the pure loop.  Both paths produce bit-identical results.
    """
    if scenario.d != 1:
        raise DimensionError("simulate_1d_fast requires 1-d data")
    if compiled is None:
        compiled = _fast1d is not None
    n = scenario.n
    tol = scenario.tolerances
    t_group, x_hit = tol.t_group, tol.x_hit
    horizon = scenario.horizon
    masses0 = scenario.masses

    x0 = scenario.positions[:, 0]
    v0 = scenario.velocities[:, 0]

    if compiled:
        if _fast1d is None:
            raise RuntimeError(
                "compiled line engine requested but numba is not installed"
            )
        raw = _fast1d.run_line(x0, v0, masses0, horizon, t_group, x_hit)
        return _from_raw(scenario, raw)

    order = np.argsort(x0, kind="stable")

    pos = array("d")
    pos.frombytes(np.ascontiguousarray(x0).tobytes())
    vel = array("d")
    vel.frombytes(np.ascontiguousarray(v0).tobytes())
    born = array("d", bytes(8 * n))
    mass = array("d")
    mass.frombytes(np.ascontiguousarray(masses0).tobytes())
    parent = array("q", [-1]) * n
    child_off = array("q", [0] * (n + 1))
    children = array("q")
    alive = bytearray([1]) * n

    left_np = np.full(n, -1, dtype=np.int64)
    right_np = np.full(n, -1, dtype=np.int64)
    left_np[order[1:]] = order[:-1]
    right_np[order[:-1]] = order[1:]
    left = array("q")
    left.frombytes(left_np.tobytes())
    right = array("q")
    right.frombytes(right_np.tobytes())

    # Initial predictions, vectorized: adjacent approaching pairs only.
    xl, xr = x0[order[:-1]], x0[order[1:]]
    vl, vr = v0[order[:-1]], v0[order[1:]]
    dv = vl - vr
    with np.errstate(divide="ignore"):
        t_init = (xr - xl) / dv
    sel = (dv > 0.0) & (t_init <= horizon + t_group)
    heap = list(
        zip(
            t_init[sel].tolist(),
            range(int(np.count_nonzero(sel))),
            order[:-1][sel].tolist(),
            order[1:][sel].tolist(),
        )
    )
    heapq.heapify(heap)
    seq = itertools.count(len(heap))
    push = heapq.heappush
    pop = heapq.heappop

    def predict(i, j):
        """Candidate meet time of adjacent clusters i (left) and j (right)."""
        r = born[i] if born[i] >= born[j] else born[j]
        gap = (pos[j] + (r - born[j]) * vel[j]) - (pos[i] + (r - born[i]) * vel[i])
        if gap <= 0.0:
            # Overlap from rounding at birth: coincident, merge just after r.
            return _just_after(r)
        dv = vel[i] - vel[j]
        if dv <= 0.0:
            return None
        t = r + gap / dv
        if t <= r:
            t = _just_after(r)
        return t

    builder = _EventBuilder(1)
    while heap:
        t0, _, a, b = pop(heap)
        if not (alive[a] and alive[b]):
            continue
        if t0 > horizon:
            break
        if heap and heap[0][0] <= t0 + t_group:
            window = [(t0, a, b, pos[a] + (t0 - born[a]) * vel[a])]
            while heap and heap[0][0] <= t0 + t_group:
                t1, _, c, e = pop(heap)
                if alive[c] and alive[e]:
                    window.append((t1, c, e, pos[c] + (t1 - born[c]) * vel[c]))
            groups = _group_window_1d(window, x_hit)
            claimed = {c for cids, _ in groups for c in cids}
        else:
            groups = [((a, b) if a < b else (b, a), t0)]
            claimed = None

        for cids, tau in groups:
            # The group occupies a contiguous run in the spatial order; walk
            # it to pick up any cluster sandwiched between group members,
            # then extend over neighbors standing within x_hit of the run.
            if len(cids) == 2 and (right[cids[0]] == cids[1] or right[cids[1]] == cids[0]):
                lm = cids[0] if right[cids[0]] == cids[1] else cids[1]
                run = [lm, right[lm]]
            else:
                # Ties in position can misorder the sort, so try each member
                # as the leftmost and accept the first walk that covers the
                # group without overshooting its rightmost position.
                def key(c):
                    return pos[c] + (tau - born[c]) * vel[c]

                memset = set(cids)
                span = sorted(cids, key=key)
                rmax = key(span[-1]) + (len(cids) + 2) * x_hit
                run = None
                for start in span:
                    trial = [start]
                    c = start
                    remaining = len(cids) - 1
                    while remaining > 0:
                        c = right[c]
                        if c < 0 or key(c) > rmax:
                            trial = None
                            break
                        trial.append(c)
                        if c in memset:
                            remaining -= 1
                    if trial is not None:
                        run = trial
                        break
                if run is None:
                    raise ToleranceConflict(
                        "merge group is not contiguous in the spatial order "
                        f"(time near {tau!r}); tighten t_group or perturb the input"
                    )
            meet = pos[run[0]] + (tau - born[run[0]]) * vel[run[0]]
            while left[run[0]] >= 0:
                c = left[run[0]]
                if abs(pos[c] + (tau - born[c]) * vel[c] - meet) <= x_hit:
                    run.insert(0, c)
                else:
                    break
            while right[run[-1]] >= 0:
                c = right[run[-1]]
                if abs(pos[c] + (tau - born[c]) * vel[c] - meet) <= x_hit:
                    run.append(c)
                else:
                    break
            if len(run) > len(cids):
                if claimed is None:
                    claimed = set(cids)
                own = set(cids)
                for c in run:
                    if c in claimed and c not in own:
                        raise ToleranceConflict(
                            f"cluster {c} is claimed by two merge groups inside "
                            f"one grouping window (time near {tau!r}); tighten "
                            "t_group or perturb the input"
                        )
                claimed.update(run)
            cids = tuple(sorted(run))

            if len(cids) == 2:
                i, j = cids
                mi, mj = mass[i], mass[j]
                mtot = mi + mj
                p_new = (mi * (pos[i] + (tau - born[i]) * vel[i])
                         + mj * (pos[j] + (tau - born[j]) * vel[j])) / mtot
                v_new = (mi * vel[i] + mj * vel[j]) / mtot
            else:
                mtot = 0.0
                px = 0.0
                vx = 0.0
                for c in cids:
                    mc = mass[c]
                    mtot += mc
                    px += mc * (pos[c] + (tau - born[c]) * vel[c])
                    vx += mc * vel[c]
                p_new = px / mtot
                v_new = vx / mtot

            nid = len(pos)
            builder.add_group(nid, cids, (p_new,), (v_new,),
                              [vel[c] for c in cids])
            pos.append(p_new)
            vel.append(v_new)
            born.append(tau)
            mass.append(mtot)
            parent.append(-1)
            children.extend(cids)
            child_off.append(len(children))
            alive.append(1)

            L, R = left[run[0]], right[run[-1]]
            left.append(L)
            right.append(R)
            if L >= 0:
                right[L] = nid
            if R >= 0:
                left[R] = nid
            for c in cids:
                alive[c] = 0
                parent[c] = nid

            if L >= 0:
                t = predict(L, nid)
                if t is not None and t <= horizon + t_group:
                    push(heap, (t, next(seq), L, nid))
            if R >= 0:
                t = predict(nid, R)
                if t is not None and t <= horizon + t_group:
                    push(heap, (t, next(seq), nid, R))
        builder.end_event(t0)

    return _finish(scenario, born, pos, vel, mass, parent, child_off, children,
                   None, builder, "1d_fast")


def _from_raw(scenario, raw):
    """Assemble a SimulationResult from the compiled kernel's arrays."""
    n = scenario.n
    total = raw["total"]
    forest = MergeForest(
        n=n,
        d=1,
        born=raw["born"],
        pos0=raw["pos0"].reshape(total, 1),
        vel=raw["vel"].reshape(total, 1),
        mass=raw["mass"],
        parent=raw["parent"],
        child_off=raw["child_off"],
        children=raw["children"],
        members=None,
    )
    g = len(raw["g_new"])
    c = len(raw["children"])
    events = EventLog(
        d=1,
        times=raw["times"],
        ev_off=raw["ev_off"],
        g_new=raw["g_new"],
        g_loc=raw["g_loc"].reshape(g, 1),
        g_post=raw["g_post"].reshape(g, 1),
        g_child_off=raw["g_child_off"],
        children=raw["children"],
        pre=raw["pre"].reshape(c, 1),
    )
    return SimulationResult(scenario, forest, events, "1d_fast")


def _finish(scenario, born, pos0_list, vel_list, mass, parent, child_off,
            children, members, builder, engine):
    n, d = scenario.n, scenario.d
    total = len(born)
    if isinstance(born, array):
        born_np = np.frombuffer(born, dtype=np.float64).copy()
        pos0_np = np.frombuffer(pos0_list, dtype=np.float64).copy().reshape(total, d)
        vel_np = np.frombuffer(vel_list, dtype=np.float64).copy().reshape(total, d)
        mass_np = np.frombuffer(mass, dtype=np.float64).copy()
    else:
        born_np = np.asarray(born, dtype=np.float64)
        pos0_np = np.asarray(pos0_list, dtype=np.float64).reshape(total, d)
        vel_np = np.asarray(vel_list, dtype=np.float64).reshape(total, d)
        mass_np = np.asarray(mass, dtype=np.float64)
    forest = MergeForest(
        n=n,
        d=d,
        born=born_np,
        pos0=pos0_np,
        vel=vel_np,
        mass=mass_np,
        parent=np.frombuffer(parent, dtype=np.int64).copy(),
        child_off=np.frombuffer(child_off, dtype=np.int64).copy(),
        children=(
            np.frombuffer(children, dtype=np.int64).copy()
            if len(children)
            else np.empty(0, dtype=np.int64)
        ),
        members={i: m for i, m in enumerate(members)} if members is not None else None,
    )
    return SimulationResult(scenario, forest, builder.build(), engine)
