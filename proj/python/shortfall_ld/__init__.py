"""Decay rates of portfolio shortfall probabilities against a stochastic
benchmark: closed-form Riccati pipeline for linear factor models, a 1-D
grid solver for saturating coefficients, the dual optimization producing
the optimal feedback portfolio, and importance-sampled Monte Carlo
verification of the rate."""

from ._core import (  # noqa: F401
    DecayRegression,
    DefinitenessError,
    DimensionError,
    DriftTilt,
    DualSolution,
    GridParams,
    GridSolution,
    MarketScenario,
    MCEstimate,
    ParseError,
    PortfolioPolicy,
    RiccatiSolution,
    SolverError,
    __version__,
    as_linear,
    as_parametric,
    build_policy,
    check_conditions,
    check_saddle,
    default_radius,
    effective_diffusion,
    ergodic_average,
    estimate_decay_rate,
    estimate_shortfall,
    eval_coefficients,
    gaussian_rate,
    gaussian_rate_derivative,
    grid_rate,
    grid_rate_derivative,
    kelly_policy,
    load_scenario,
    log_ratio_drift,
    log_ratio_vol,
    make_tilt,
    nullspace_projector,
    optimal_portfolio,
    optimized_hamiltonian,
    parse_scenario,
    shortfall_rate,
    solve_ergodic_hjb,
    solve_shortfall,
    truncate_policy,
    unhedgeable_projector,
)
