"""Graph trend filtering: l1 denoising of node signals with graph difference penalties."""

from .estimators import GraphTrendFilter, LaplacianSmoother, MadClassifier
from .exceptions import *  # noqa: F401,F403
from .flow import tv_denoise, tv_denoise_first_order
from .graph import Graph, build_graph, chain, erdos_renyi, grid2d, knn_graph, star
from .model_eval import (
    estimate_df,
    lambda_crit,
    lambda_path,
    nullspace_residual,
    stein_df_monte_carlo,
)
from .operators import DifferenceOperator
from .solvers import (
    GtfFit,
    SolverOptions,
    gtf_admm,
    gtf_projected_newton,
    kkt_residuals,
    laplacian_smooth,
    solve,
    sparse_gtf,
)
from .transduction import MadProblem, mad_gtf, mad_laplacian

__version__ = "0.1.0"
