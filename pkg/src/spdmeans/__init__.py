"""Means of symmetric positive definite matrices and the spectral mean equation."""
from .means2 import (
    G_INVERSE,
    G_LINEAR,
    G_LOG,
    RepFunction,
    alt_mean,
    geo_mean,
    geo_mean_t,
    g_power,
    kubo_ando,
    parse_f,
    parse_g,
    riccati_solve,
    spectral_mean_t,
    verify_alt_equation,
    wasserstein2_t,
)
from .meansm import (
    MeanProblem,
    SolveOutcome,
    SolverOptions,
    arithmetic,
    elementary_mean,
    generalized_karcher,
    harmonic,
    karcher_mean,
    log_euclidean,
    power_mean,
    wasserstein_mean,
)
from .pdcore import (
    DomainError,
    SPDError,
    as_spd,
    compound,
    distance,
    order_check,
    thompson,
)
from .speqsolve import (
    SolutionSet,
    explore_solutions,
    flow_derivative_check,
    psi_residual,
    residual,
    solve_equation,
)

__version__ = "0.1.0"
