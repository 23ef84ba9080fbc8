"""Tests of the event-driven engines: collision prediction, merge rule,
grouping windows, and the two 1D implementations against each other."""

import logging
import math

import numpy as np
import pytest

import stickysim.engine as eng
from stickysim import (
    Cluster,
    DimensionError,
    Scenario,
    ToleranceConflict,
    pair_collision_time,
    simulate,
    simulate_1d_fast,
)

needs_numba = pytest.mark.skipif(eng._fast1d is None, reason="numba not installed")


def cluster(x, v, born=0.0, mass=0.5, members=frozenset({0})):
    return Cluster(
        members=members, mass=mass,
        position=np.atleast_1d(np.asarray(x, dtype=np.float64)),
        velocity=np.atleast_1d(np.asarray(v, dtype=np.float64)),
        born_at=born,
    )


def random_line_scenario(rng, n):
    m = rng.uniform(0.5, 1.5, n)
    m = m / m.sum()
    x = np.sort(rng.uniform(0.0, 2.0, n))[:, None]
    v = rng.uniform(-1.0, 1.0, (n, 1))
    return Scenario.from_arrays(m, x, v)


# ---------------------------------------------------------------------------
# pair_collision_time


def test_pair_time_head_on():
    t = pair_collision_time(cluster(0.0, 1.0), cluster(1.0, -1.0), now=0.0)
    assert t == pytest.approx(0.5, abs=1e-15)


def test_pair_time_diverging_is_none():
    assert pair_collision_time(cluster(0.0, 1.0), cluster(1.0, 2.0), now=0.0) is None


def test_pair_time_2d_chase():
    a = cluster([0.0, 0.0], [1.0, 1.0])
    b = cluster([2.0, 2.0], [0.0, 0.0])
    assert pair_collision_time(a, b, now=0.0) == pytest.approx(2.0, abs=1e-12)


def test_pair_time_2d_miss_is_none():
    a = cluster([0.0, 0.0], [1.0, 0.0])
    b = cluster([2.0, 1.0], [0.0, 0.0])  # passes 1.0 away, far above x_hit
    assert pair_collision_time(a, b, now=0.0) is None


def test_pair_time_respects_now():
    # meet time 0.5 lies before now=0.75, so no future collision
    assert pair_collision_time(cluster(0.0, 1.0), cluster(1.0, -1.0), now=0.75) is None


# ---------------------------------------------------------------------------
# frozen small scenarios


def test_head_on_pair_full_contract():
    sc = Scenario.from_arrays([0.5, 0.5], [[0.0], [1.0]], [[1.0], [-1.0]])
    res = simulate(sc)
    assert len(res.events) == 1
    ev = res.events[0]
    assert ev.time == pytest.approx(0.5, abs=1e-12)
    assert ev.groups == ((0, 1),)
    assert ev.post_velocities[0, 0] == 0.0
    assert ev.locations[0, 0] == pytest.approx(0.5, abs=1e-12)
    for i in range(2):
        pos, vel = res.trajectory(i).eval(np.array([1.5]))
        assert pos[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert vel[0, 0] == 0.0
    final = res.final_clusters
    assert len(final) == 1
    assert final[0].members == frozenset({0, 1})
    assert final[0].mass == 1.0


def test_ordered_separating_pair_no_events():
    sc = Scenario.from_arrays([0.4, 0.6], [[0.0], [1.0]], [[-1.0], [1.0]])
    for res in (simulate(sc), simulate_1d_fast(sc)):
        assert len(res.events) == 0
        assert len(res.final_clusters) == 2


def test_triple_simultaneous_meet_is_one_event():
    # all three paths pass through x=1 at t=0.5
    third = 1.0 / 3.0
    sc = Scenario.from_arrays(
        [third, third, third], [[0.0], [1.0], [2.0]], [[2.0], [0.0], [-2.0]]
    )
    for res in (simulate(sc), simulate_1d_fast(sc)):
        assert len(res.events) == 1
        ev = res.events[0]
        assert ev.time == pytest.approx(0.5, abs=1e-9)
        assert ev.groups == ((0, 1, 2),)
        assert ev.post_velocities[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert ev.locations[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_two_stage_merge_frozen_sequence():
    # pair meets at t=0.5 (x=0.5, v=0.25), absorbs the third at t=1.3 (x=0.7)
    sc = Scenario.from_arrays(
        [0.5, 0.3, 0.2], [[0.0], [1.0], [2.0]], [[1.0], [-1.0], [-1.0]]
    )
    for res in (simulate(sc), simulate_1d_fast(sc)):
        assert len(res.events) == 2
        e0, e1 = res.events[0], res.events[1]
        assert e0.time == pytest.approx(0.5, abs=1e-12)
        assert e0.groups == ((0, 1),)
        assert e0.post_velocities[0, 0] == pytest.approx(0.25, abs=1e-15)
        assert e1.time == pytest.approx(1.3, abs=1e-12)
        assert e1.post_velocities[0, 0] == pytest.approx(0.0, abs=1e-15)
        assert e1.locations[0, 0] == pytest.approx(0.7, abs=1e-12)


def test_aimed_2d_pair():
    sc = Scenario.from_arrays(
        [0.5, 0.5], [[0.0, 0.0], [2.0, 2.0]], [[1.0, 1.0], [0.0, 0.0]],
        horizon=3.0,
    )
    res = simulate(sc)
    assert len(res.events) == 1
    ev = res.events[0]
    assert ev.time == pytest.approx(2.0, abs=1e-9)
    assert np.allclose(ev.locations[0], [2.0, 2.0], atol=1e-9)
    assert np.allclose(ev.post_velocities[0], [0.5, 0.5], atol=1e-15)


def test_rigid_translation_zero_events():
    sc = Scenario.from_arrays(
        [0.25, 0.25, 0.5], [[0.0], [1.0], [2.0]], [[0.7], [0.7], [0.7]]
    )
    for res in (simulate(sc), simulate_1d_fast(sc)):
        assert len(res.events) == 0


def test_fast_engine_rejects_2d():
    sc = Scenario.from_arrays([1.0], [[0.0, 0.0]], [[1.0, 0.0]])
    with pytest.raises(DimensionError):
        simulate_1d_fast(sc)


# ---------------------------------------------------------------------------
# merge rule and structural invariants


def test_merge_rule_is_mass_average_exactly():
    rng = np.random.default_rng(7)
    for trial in range(20):
        sc = random_line_scenario(rng, int(rng.integers(3, 12)))
        res = simulate_1d_fast(sc)
        f = res.forest
        for cid in range(res.n, len(f.born)):
            kids = f.children_of(cid)
            m = f.mass[kids]
            expect = (m[:, None] * f.vel[kids]).sum(axis=0) / m.sum()
            assert abs(f.vel[cid, 0] - expect[0]) < 1e-15
            mem = f.members_of(cid)
            exact_mass = math.fsum(sc.masses[mem].tolist())
            assert abs(f.mass[cid] - exact_mass) < 1e-15


def test_sticky_property_exact_shared_tails():
    rng = np.random.default_rng(11)
    for trial in range(10):
        sc = random_line_scenario(rng, 10)
        res = simulate_1d_fast(sc)
        for ev in res.events:
            for nid, group in zip(ev.new_ids, ev.groups):
                mem = res.members_of(nid)
                ref = res.trajectory(int(mem[0]))
                cut = np.searchsorted(ref.times, ev.time)
                for i in mem[1:]:
                    traj = res.trajectory(int(i))
                    k = np.searchsorted(traj.times, ev.time)
                    assert np.array_equal(traj.times[k:], ref.times[cut:])
                    assert np.array_equal(traj.positions[k:], ref.positions[cut:])
                    assert np.array_equal(traj.velocities[k:], ref.velocities[cut:])


def test_order_preservation_on_line():
    rng = np.random.default_rng(13)
    for trial in range(10):
        sc = random_line_scenario(rng, 15)
        res = simulate_1d_fast(sc)
        grid = np.linspace(0.0, sc.horizon, 37)
        P, _ = res.states_at(np.concatenate([grid, res.events.times]))
        assert np.all(np.diff(P[:, :, 0], axis=1) >= -1e-12)


def test_cluster_count_nonincreasing():
    rng = np.random.default_rng(17)
    sc = random_line_scenario(rng, 30)
    res = simulate_1d_fast(sc)
    grid = np.sort(np.concatenate([np.linspace(0, sc.horizon, 50), res.events.times]))
    counts = [len(res.cluster_ids_at(t)) for t in grid]
    assert np.all(np.diff(counts) <= 0)
    assert counts[0] == 30
    assert counts[-1] == len(res.final_clusters)


def test_momentum_conserved_at_events_and_grid():
    rng = np.random.default_rng(19)
    for d, builder in ((1, simulate_1d_fast), (2, simulate)):
        if d == 1:
            sc = random_line_scenario(rng, 12)
        else:
            x = rng.uniform(-1, 1, (6, 2))
            v = np.empty((6, 2))
            for i in range(0, 6, 2):
                tgt = rng.uniform(-1, 1, 2)
                v[i : i + 2] = (tgt - x[i : i + 2]) / 0.8
            m = rng.uniform(0.5, 1.5, 6)
            sc = Scenario.from_arrays(m / m.sum(), x, v)
        res = builder(sc)
        times = np.concatenate([np.linspace(0, sc.horizon, 21), res.events.times])
        _, V = res.states_at(times)
        p = np.einsum("i,tid->td", sc.masses, V)
        p0 = sc.masses @ sc.velocities
        assert np.abs(p - p0).max() < 1e-9


def test_event_times_strictly_increasing_and_bounded_count():
    rng = np.random.default_rng(23)
    for trial in range(10):
        n = int(rng.integers(2, 40))
        sc = random_line_scenario(rng, n)
        res = simulate_1d_fast(sc)
        assert np.all(np.diff(res.events.times) > 0)
        merges = len(res.forest.born) - n
        assert merges <= n - 1


def test_eventlog_indexing_and_slicing():
    sc = Scenario.from_arrays(
        [0.5, 0.3, 0.2], [[0.0], [1.0], [2.0]], [[1.0], [-1.0], [-1.0]]
    )
    res = simulate_1d_fast(sc)
    log_ = res.events
    assert len(log_) == 2
    assert log_[-1].time == log_[1].time
    assert [e.time for e in log_[:2]] == [log_[0].time, log_[1].time]
    assert [e.time for e in log_] == list(log_.times)
    with pytest.raises(IndexError):
        log_[2]


def test_states_at_matches_trajectories():
    rng = np.random.default_rng(29)
    sc = random_line_scenario(rng, 9)
    res = simulate_1d_fast(sc)
    times = np.sort(rng.uniform(0, sc.horizon, 23))
    P, V = res.states_at(times)
    for i in range(sc.n):
        pos, vel = res.trajectory(i).eval(times)
        assert np.abs(P[:, i] - pos).max() < 1e-12
        assert np.array_equal(V[:, i], vel)


# ---------------------------------------------------------------------------
# the two line engines agree; compiled and pure paths are bit-identical


def test_fast_engine_matches_general_engine():
    rng = np.random.default_rng(31)
    for trial in range(25):
        n = int(rng.integers(2, 11))
        sc = random_line_scenario(rng, n)
        ra = simulate(sc)
        rb = simulate_1d_fast(sc)
        assert len(ra.events) == len(rb.events)
        for ea, eb in zip(ra.events, rb.events):
            assert abs(ea.time - eb.time) <= sc.tolerances.t_group
            assert ea.groups == eb.groups
            assert np.abs(ea.post_velocities - eb.post_velocities).max() < 1e-12
        sa = {c.members for c in ra.final_clusters}
        sb = {c.members for c in rb.final_clusters}
        assert sa == sb


@needs_numba
def test_compiled_and_pure_paths_bit_identical():
    rng = np.random.default_rng(37)
    for trial in range(15):
        n = int(rng.integers(2, 60))
        sc = random_line_scenario(rng, n)
        rp = simulate_1d_fast(sc, compiled=False)
        rc = simulate_1d_fast(sc, compiled=True)
        fp, fc = rp.forest, rc.forest
        assert np.array_equal(fp.born, fc.born)
        assert np.array_equal(fp.pos0, fc.pos0)
        assert np.array_equal(fp.vel, fc.vel)
        assert np.array_equal(fp.mass, fc.mass)
        assert np.array_equal(fp.parent, fc.parent)
        assert np.array_equal(fp.children, fc.children)
        assert np.array_equal(rp.events.times, rc.events.times)


# ---------------------------------------------------------------------------
# tolerance-window pathologies are signalled, not resolved


def test_general_engine_tolerance_conflict():
    # fast mover c meets a at t=1 and would meet b at t=1+5e-10; the two
    # meet points are 5e-9 apart, beyond x_hit, with c claimed by both
    sc = Scenario.from_arrays(
        [0.25, 0.25, 0.5],
        [[0.0], [20.0], [20.0 + 1e-8]],
        [[10.0], [-10.0], [-10.0]],
    )
    with pytest.raises(ToleranceConflict):
        simulate(sc)


def test_line_engine_tolerance_conflict_pure():
    sc = Scenario.from_arrays(
        [0.25, 0.25, 0.5],
        [[-0.5], [0.0], [10.0 + 5e-9]],
        [[10.5], [10.0], [0.0]],
    )
    with pytest.raises(ToleranceConflict):
        simulate_1d_fast(sc, compiled=False)


@needs_numba
def test_line_engine_tolerance_conflict_compiled():
    sc = Scenario.from_arrays(
        [0.25, 0.25, 0.5],
        [[-0.5], [0.0], [10.0 + 5e-9]],
        [[10.5], [10.0], [0.0]],
    )
    with pytest.raises(ToleranceConflict):
        simulate_1d_fast(sc, compiled=True)


def test_grazing_pair_warns_and_does_not_merge(caplog):
    sc = Scenario.from_arrays(
        [0.5, 0.5],
        [[0.0, 0.0], [2.0, 1.5e-9]],
        [[1.0, 0.0], [0.0, 0.0]],
        horizon=3.0,
    )
    with caplog.at_level(logging.WARNING, logger="stickysim.engine"):
        res = simulate(sc)
    assert len(res.events) == 0
    assert any("grazing" in rec.message for rec in caplog.records)


# ---------------------------------------------------------------------------
# brute-force oracle spot check (the full sweep runs in the acceptance suite)


def test_oracle_agreement_spot_check():
    from brute_force import brute_positions

    sc = Scenario.from_arrays(
        [0.5, 0.3, 0.2], [[0.0], [1.0], [2.0]], [[1.0], [-1.0], [-1.0]]
    )
    res = simulate_1d_fast(sc)
    times, P = brute_positions(sc)
    Pe, _ = res.states_at(times)
    assert np.abs(Pe - P).max() < 1e-3
