"""Tests of the shared domain types: particles, scenarios, trajectories,
atomic measures and their serialization."""

import json
import math

import numpy as np
import pytest

from stickysim import (
    AtomicMeasure,
    DegenerateInput,
    DimensionError,
    DomainError,
    EngineTolerances,
    ParticleInit,
    Scenario,
    Trajectory,
    canonicalize,
    eval_trajectory,
)


def test_particle_init_coerces_and_validates():
    p = ParticleInit(0.5, 1.0, -2.0)
    assert p.x.shape == (1,) and p.v.shape == (1,)
    assert p.d == 1
    with pytest.raises(ValueError):
        ParticleInit(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        ParticleInit(0.5, [0.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        ParticleInit(0.5, [math.nan], [0.0])


def test_scenario_mass_normalization_enforced():
    with pytest.raises(ValueError):
        Scenario.from_arrays([0.5, 0.6], [[0.0], [1.0]], [[0.0], [0.0]])
    # fsum-level accuracy: 10 masses of 0.1 pass
    Scenario.from_arrays([0.1] * 10, np.arange(10.0)[:, None], np.zeros((10, 1)))


def test_scenario_rejects_coincident_positions():
    with pytest.raises(DegenerateInput) as exc:
        Scenario.from_arrays(
            [0.25, 0.5, 0.25],
            [[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]],
            np.zeros((3, 2)),
        )
    assert "0" in str(exc.value) and "2" in str(exc.value)


def test_scenario_rejects_mixed_dimensions():
    with pytest.raises(DimensionError):
        Scenario([ParticleInit(0.5, [0.0], [0.0]), ParticleInit(0.5, [1.0, 1.0], [0.0, 0.0])])


def test_scenario_roundtrip_is_bit_exact():
    rng = np.random.default_rng(0)
    m = rng.uniform(0.1, 1.0, 7)
    m /= m.sum()
    sc = Scenario.from_arrays(
        m, rng.standard_normal((7, 3)), rng.standard_normal((7, 3)),
        horizon=1.75, tolerances=EngineTolerances(t_group=1e-10),
    )
    back = Scenario.from_json(sc.to_json())
    assert np.array_equal(back.masses, sc.masses)
    assert np.array_equal(back.positions, sc.positions)
    assert np.array_equal(back.velocities, sc.velocities)
    assert back.horizon == sc.horizon
    assert back.tolerances == sc.tolerances
    # and the serialized form itself is stable
    assert back.to_json() == sc.to_json()


def test_scenario_save_load(tmp_path):
    sc = Scenario.from_arrays([1.0], [[0.0]], [[1.0]])
    path = tmp_path / "s.json"
    sc.save(path)
    back = Scenario.load(path)
    assert np.array_equal(back.positions, sc.positions)


def test_scenario_from_dict_malformed():
    with pytest.raises(ValueError):
        Scenario.from_dict({"particles": [{"m": 1.0}]})
    with pytest.raises(ValueError):
        Scenario.from_json("{broken")


def test_tolerances_must_be_positive():
    with pytest.raises(ValueError):
        EngineTolerances(t_group=0.0)
    with pytest.raises(ValueError):
        EngineTolerances(x_hit=-1e-9)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory([0.5], [[0.0]], [[1.0]])  # must start at 0
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], [[0.0], [0.0]], [[1.0], [1.0]])  # strictly increasing
    with pytest.raises(ValueError):
        # position at breakpoint 1 inconsistent with segment velocity
        Trajectory([0.0, 1.0], [[0.0], [5.0]], [[1.0], [1.0]])


def test_eval_trajectory_single_segment():
    traj = Trajectory([0.0], [[0.0]], [[1.0]])
    pos, vel = eval_trajectory(traj, 2.0)
    assert pos[0] == 2.0 and vel[0] == 1.0


def test_eval_trajectory_right_continuity_at_breakpoint():
    traj = Trajectory([0.0, 0.5], [[0.0], [0.5]], [[1.0], [0.0]])
    pos, vel = eval_trajectory(traj, 0.5)
    assert pos[0] == 0.5 and vel[0] == 0.0  # later segment wins exactly at t=0.5
    pos, vel = eval_trajectory(traj, 0.25)
    assert pos[0] == 0.25 and vel[0] == 1.0
    with pytest.raises(DomainError):
        eval_trajectory(traj, -0.1)


def test_eval_trajectory_vectorized():
    traj = Trajectory([0.0, 0.5], [[0.0], [0.5]], [[1.0], [0.0]])
    pos, vel = eval_trajectory(traj, [0.0, 0.25, 0.5, 2.0])
    assert np.allclose(pos[:, 0], [0.0, 0.25, 0.5, 0.5])
    assert np.array_equal(vel[:, 0], [1.0, 1.0, 0.0, 0.0])


def test_atomic_measure_validation():
    with pytest.raises(ValueError):
        AtomicMeasure([0.5, 0.4], [0.0, 1.0])  # weights sum 0.9
    with pytest.raises(ValueError):
        AtomicMeasure([1.0, 0.0], [0.0, 1.0])  # zero weight
    mu = AtomicMeasure([0.25, 0.75], [[0.0, 0.0], [1.0, 1.0]])
    assert mu.n_atoms == 2 and mu.m == 2


def test_canonicalize_examples():
    mu = canonicalize(AtomicMeasure([0.5, 0.5], [0.0, 0.0]))
    assert mu.n_atoms == 1 and mu.weights[0] == 1.0

    nu = AtomicMeasure([0.3, 0.7], [1.0, 2.0])
    out = canonicalize(nu)
    assert out.n_atoms == 2
    assert np.array_equal(out.points, nu.points)

    tri = canonicalize(AtomicMeasure([0.25, 0.25, 0.5], [1.0, 1.0, -1.0]))
    assert tri.n_atoms == 2
    assert np.array_equal(tri.weights, [0.5, 0.5])
    assert np.array_equal(tri.points[:, 0], [1.0, -1.0])


def test_canonicalize_idempotent_and_mass_preserving():
    rng = np.random.default_rng(3)
    pts = rng.integers(0, 4, 30).astype(np.float64)
    w = rng.uniform(0.1, 1.0, 30)
    w /= w.sum()
    # renormalize exactly enough for the constructor
    w[-1] += 1.0 - math.fsum(w.tolist())
    mu = AtomicMeasure(w, pts)
    once = canonicalize(mu)
    twice = canonicalize(once)
    assert once.n_atoms == twice.n_atoms
    assert np.array_equal(once.weights, twice.weights)
    assert abs(math.fsum(once.weights.tolist()) - 1.0) < 1e-15


def test_cluster_position_at():
    from stickysim import Cluster

    c = Cluster(
        members=frozenset({0, 1}), mass=0.5,
        position=np.array([1.0, 0.0]), velocity=np.array([0.0, 2.0]),
        born_at=0.5,
    )
    assert np.allclose(c.position_at(1.0), [1.0, 1.0])


def test_scenario_json_matches_documented_shape():
    sc = Scenario.from_arrays([0.5, 0.5], [[0.0], [1.0]], [[1.0], [-1.0]])
    data = json.loads(sc.to_json())
    assert set(data) == {"particles", "horizon", "tolerances"}
    assert data["particles"][0] == {"m": 0.5, "x": [0.0], "v": [1.0]}
    assert set(data["tolerances"]) == {"t_group", "x_hit", "residual_quad"}
