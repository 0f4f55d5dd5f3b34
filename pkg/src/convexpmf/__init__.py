"""Least squares estimation of convex probability mass functions."""

from ._backend import BACKEND
from .diagnostics import (
    CertificateReport,
    CertificateTolerances,
    LossReport,
    MomentReport,
    certify,
    losses,
    moments,
    slope_change_points,
)
from .distributions import (
    POISSON_CONVEXITY_THRESHOLD,
    TrueDistribution,
    materialize,
    parse_distribution,
    sample,
)
from .harness import (
    CampaignRow,
    ExperimentResult,
    ExperimentSpec,
    HarnessError,
    result_rows,
    rows_to_csv,
    rows_to_json,
    run_campaign,
    run_experiment,
    standard_grid,
)
from .pmf import (
    EmpiricalPmf,
    Pmf,
    TriangularMixture,
    cumulative_F,
    cumulative_H,
    empirical_from_counts,
    empirical_from_samples,
    empirical_is_convex,
    is_convex,
    mixture_to_pmf,
    pmf_to_mixture,
    triangular_value,
)
from .oracle import oracle_fit, oracle_solve, oracle_problem
from .solver import (
    FitResult,
    SolverConfig,
    SolverError,
    criterion_Psi,
    criterion_Q,
    directional_derivative_d,
    fit,
    fit_fixed_L,
    project_vector,
    restricted_minimizer,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CampaignRow",
    "CertificateReport",
    "CertificateTolerances",
    "EmpiricalPmf",
    "ExperimentResult",
    "ExperimentSpec",
    "FitResult",
    "HarnessError",
    "LossReport",
    "MomentReport",
    "POISSON_CONVEXITY_THRESHOLD",
    "Pmf",
    "SolverConfig",
    "SolverError",
    "TriangularMixture",
    "TrueDistribution",
    "certify",
    "criterion_Psi",
    "criterion_Q",
    "cumulative_F",
    "cumulative_H",
    "directional_derivative_d",
    "empirical_from_counts",
    "empirical_from_samples",
    "empirical_is_convex",
    "fit",
    "fit_fixed_L",
    "is_convex",
    "losses",
    "materialize",
    "mixture_to_pmf",
    "moments",
    "oracle_fit",
    "oracle_problem",
    "oracle_solve",
    "parse_distribution",
    "pmf_to_mixture",
    "project_vector",
    "restricted_minimizer",
    "result_rows",
    "rows_to_csv",
    "rows_to_json",
    "run_campaign",
    "run_experiment",
    "sample",
    "slope_change_points",
    "standard_grid",
    "triangular_value",
    "__version__",
]
