"""Optimal public-private partnership contracts under moral hazard.

HJB solver (upwind finite differences + Howard policy iteration), Monte Carlo
validation of the optimal contract, and cost-positivity probabilities.
"""
from .hjb import (
    Grid,
    HowardConfig,
    HowardResult,
    Policy,
    TridiagonalSystem,
    ValueFunction,
    assemble_system,
    check_diagonal_dominance,
    coefficients,
    howard_solve,
    improve_policy,
    optimal_rent_closed_form,
    policy_curves,
    policy_evaluation,
    solve,
    solve_tridiagonal,
)
from .model import (
    FunctionBundle,
    ModelParams,
    boundary_v0,
    compute_abar,
    compute_xbar,
    example_bundle,
    incentive_effort,
    upper_bound_v,
    validate_assumptions,
)
from .risk import RiskQuery, hitting_probability, ig_density, min_initial_cost, positivity_bound
from .simulate import (
    PathStats,
    SimConfig,
    interpolate_policy,
    mc_consortium_value,
    mc_public_value,
    mc_values,
    simulate_cost_welfare,
    simulate_vc,
)

__version__ = "0.1.0"
