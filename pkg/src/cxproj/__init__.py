"""Convex-order projections, martingale couplings, and discrete MOT.

The package turns pairs (or chains) of sampled probability measures into
convex-ordered ones -- explicitly through quantile/hull calculus in one
dimension, through a Frank-Wolfe quadratic program over transportation
polytopes in general dimension -- and then solves martingale optimal
transport on the repaired marginals, exactly by linear programming or
approximately by entropic scaling.
"""

from .chain import MarginalChain, backward_chain, forward_chain
from .coupling import Coupling, SolveReport
from .errors import ConvexOrderError, SolverError
from .experiments import (
    ExperimentConfig,
    black_scholes_best_of,
    corner_cluster_fraction,
    exp_2d_explicit,
    exp_bestof,
    exp_convergence,
    exp_table1,
    median_loglog_slope,
)
from .hull import (
    PiecewiseLinear,
    concave_hull,
    convex_hull,
    integrated_quantile_diff,
    left_derivative,
    merge_breakpoints,
)
from .measures import (
    CX_TOL,
    LOGNORMAL_COV,
    DiscreteMeasure,
    QuantileFn,
    baker_discretize,
    center_to_mean,
    leq_cx_1d,
    leq_cx_lp,
    sample,
    w2_vs_gaussian,
    w_rho_1d,
)
from .mot import (
    MotProblem,
    MotSolution,
    martingale_bregman_project,
    payoff,
    solve_entropic,
    solve_entropic_anneal,
    solve_exact,
)
from .normal import GaussianQuantile, norm_cdf, norm_pdf, norm_quantile
from .project1d import (
    IrreducibleComponents,
    Projection1DResult,
    distance_identity_check,
    irreducible_components,
    project_down,
    project_up,
    transport_map,
)
from .qp_project import ProjectionQpResult, fw_linear_oracle, project_qp
from .transport import BACKEND, nw_corner, solve_transport

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CX_TOL",
    "LOGNORMAL_COV",
    "ConvexOrderError",
    "Coupling",
    "DiscreteMeasure",
    "ExperimentConfig",
    "GaussianQuantile",
    "IrreducibleComponents",
    "MarginalChain",
    "MotProblem",
    "MotSolution",
    "PiecewiseLinear",
    "Projection1DResult",
    "ProjectionQpResult",
    "QuantileFn",
    "SolveReport",
    "SolverError",
    "backward_chain",
    "baker_discretize",
    "black_scholes_best_of",
    "center_to_mean",
    "concave_hull",
    "convex_hull",
    "corner_cluster_fraction",
    "distance_identity_check",
    "exp_2d_explicit",
    "exp_bestof",
    "exp_convergence",
    "exp_table1",
    "forward_chain",
    "fw_linear_oracle",
    "integrated_quantile_diff",
    "irreducible_components",
    "left_derivative",
    "leq_cx_1d",
    "leq_cx_lp",
    "martingale_bregman_project",
    "median_loglog_slope",
    "merge_breakpoints",
    "norm_cdf",
    "norm_pdf",
    "norm_quantile",
    "nw_corner",
    "payoff",
    "project_down",
    "project_qp",
    "project_up",
    "sample",
    "solve_entropic",
    "solve_entropic_anneal",
    "solve_exact",
    "transport_map",
    "w2_vs_gaussian",
    "w_rho_1d",
]
