"""Sticky particle flows: simulation engines and verification tooling."""

from .continuum import (
    ContinuumRecipe,
    ConvergenceReport,
    PiecewiseConstantDensity,
    TruncatedGaussianDensity,
    UniformDensity,
    converge_study,
    quantize,
    scenario_from_recipe,
)
from .core import (
    AtomicMeasure,
    Cluster,
    DegenerateInput,
    DimensionError,
    DomainError,
    EngineTolerances,
    ParticleInit,
    QuadratureBudgetExceeded,
    Scenario,
    ToleranceConflict,
    Trajectory,
    UnboundedSupport,
    canonicalize,
    eval_trajectory,
)
from .engine import (
    CollisionEvent,
    SimulationResult,
    pair_collision_time,
    simulate,
    simulate_1d_fast,
)
from .eulerian import (
    SpaceTimeBump,
    averaging_residuals,
    check_averaging,
    check_convex_monotone,
    check_entropy_1d,
    check_qspp_1d,
    kinetic_energy,
    momentum,
    random_test_functions,
    slice_at,
    weak_residuals,
)
from .transport import PushforwardCurve, curve_variation, pushforward_curve, w1
from .variation import (
    grid_variation,
    mass_avg_variation,
    total_variation,
    variation_bound,
    velocity_path,
    velocity_spread,
)

__all__ = [
    "AtomicMeasure",
    "Cluster",
    "CollisionEvent",
    "ContinuumRecipe",
    "ConvergenceReport",
    "DegenerateInput",
    "DimensionError",
    "DomainError",
    "EngineTolerances",
    "ParticleInit",
    "PiecewiseConstantDensity",
    "PushforwardCurve",
    "QuadratureBudgetExceeded",
    "Scenario",
    "SimulationResult",
    "SpaceTimeBump",
    "ToleranceConflict",
    "Trajectory",
    "TruncatedGaussianDensity",
    "UnboundedSupport",
    "UniformDensity",
    "averaging_residuals",
    "canonicalize",
    "check_averaging",
    "check_convex_monotone",
    "check_entropy_1d",
    "check_qspp_1d",
    "converge_study",
    "curve_variation",
    "eval_trajectory",
    "grid_variation",
    "kinetic_energy",
    "mass_avg_variation",
    "momentum",
    "pair_collision_time",
    "pushforward_curve",
    "quantize",
    "random_test_functions",
    "scenario_from_recipe",
    "simulate",
    "simulate_1d_fast",
    "slice_at",
    "total_variation",
    "variation_bound",
    "velocity_path",
    "velocity_spread",
    "w1",
]

__version__ = "0.1.0"
