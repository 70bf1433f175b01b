"""
Decentralized ADMM with truncated-Taylor approximate Newton primal steps.

The main entry points are :func:`run` (global form), :func:`run_distributed`
(agent-level simulation), :func:`reference_solution` (centralized oracle)
and :func:`certify` (numerical convergence certificate).
"""

from .admm import (
    GlobalState,
    Hyper,
    IterationTrace,
    TheoryParams,
    admm_step,
    comm_rounds_per_iteration,
    error_term,
    lyapunov,
    optimize_theory_params,
    run,
    step_with_info,
    theory_for,
    theory_params,
)
from .certify import CertificateReport, certify
from .graph import Graph, build_random_connected, incidence_matrix, lambda_min_anchor, laplacian_parts
from .objective import L1, Problem, QuadraticCost, Zero, smooth_bounds
from .reference import ReferenceSolution, kkt_residuals, reference_solution, solve_centralized
from .simulator import run_distributed
from .splitting import gamma_bound, newton_direction, spectral_radius_bound

__version__ = "0.1.0"
