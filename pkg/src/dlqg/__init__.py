"""Globally optimal distributed finite-horizon LQG controllers by projected gradient descent."""

__version__ = "0.1.0"

from .cost import cost_k, cost_q, grad_k, grad_q, h_inv, h_map, monte_carlo_cost, quadratic_form
from .model import CompactSystem, SystemData, assemble_compact, closed_loop_trajectories, validate_system_data
from .optimize import OptimizerConfig, SynthesisReport, projected_gradient_descent, random_init, wolfe_bisection
from .problem import Problem, load_problem
from .qp import recover_controller, solve_q_domain
from .subspace import SubspaceSpec, qi_test_binary, qi_test_definition, sparsity_subspace, static_diag_subspace
from .ustest import RestrictedCost, USCertificate, certify_us, sampled_convexity_test

__all__ = [
    "CompactSystem", "OptimizerConfig", "Problem", "RestrictedCost", "SubspaceSpec",
    "SynthesisReport", "SystemData", "USCertificate", "assemble_compact", "certify_us",
    "closed_loop_trajectories", "cost_k", "cost_q", "grad_k", "grad_q", "h_inv", "h_map",
    "load_problem", "monte_carlo_cost", "projected_gradient_descent", "qi_test_binary",
    "qi_test_definition", "quadratic_form", "random_init", "recover_controller",
    "sampled_convexity_test", "solve_q_domain", "sparsity_subspace", "static_diag_subspace",
    "validate_system_data", "wolfe_bisection",
]
