"""Joint estimation of multiple Gaussian linear SEM DAGs that share a causal
order and a sparse union support."""

from .exhaustive import fit_exhaustive, objective_at
from .graph_core import (acyclicity, grad_h, h_expm, h_poly, is_consistent,
                         mask_from_permutation, permutation_from_mask)
from .group_lasso import fit_fixed_order, group_norm, ols_refit, prox_group
from .joint_solver import (EstimationResult, Hyperparams, extract_estimate,
                           fit_joint, gradient_f, smooth_objective,
                           theory_lambda)
from .metrics import frob_error, order_success, structure_metrics, theta
from .sem_sim import (SemFamily, SemModel, TaskBundle, covariance,
                      generate_family, sample_data)

__all__ = [
    "EstimationResult", "Hyperparams", "SemFamily", "SemModel", "TaskBundle",
    "acyclicity", "covariance", "extract_estimate", "fit_exhaustive",
    "fit_fixed_order", "fit_joint", "frob_error", "generate_family",
    "grad_h", "gradient_f", "group_norm", "h_expm", "h_poly",
    "is_consistent", "mask_from_permutation", "objective_at", "ols_refit",
    "order_success", "permutation_from_mask", "prox_group", "sample_data",
    "smooth_objective", "structure_metrics", "theory_lambda", "theta",
]

__version__ = "0.1.0"
