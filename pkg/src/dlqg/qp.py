"""Exact minimization of the disturbance-feedback cost over a subspace.

J~ is a strictly convex quadratic, so its minimum over ``Q = unvec(M alpha)``
is one SPD linear solve. For QI subspaces the minimizer maps through ``h`` to
the optimal controller; for other subspaces the result is only the Q-domain
optimum and need not correspond to a feasible controller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .cost import QuadraticForm, h_map, quadratic_form
from .errors import NumericallyIndefinite, SubspaceEscape
from .model import CompactSystem, causal_mask
from .subspace import SubspaceSpec, vec

ESCAPE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ReducedQuadratic:
    """1/2 a'Hr a + gr'a + c = J~(unvec(M a))."""

    Hr: np.ndarray
    gr: np.ndarray
    c: float

    def value(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        return float(0.5 * alpha @ self.Hr @ alpha + self.gr @ alpha + self.c)


@dataclass
class QDomainSolution:
    Q: np.ndarray
    J: float
    alpha: np.ndarray
    label: str = "Q-domain optimum (not controller-feasible unless QI)"


def reduce_quadratic(qf: QuadraticForm, spec: SubspaceSpec) -> ReducedQuadratic:
    offcausal = vec(causal_mask(spec.m, spec.p, spec.N)) == 0
    if spec.dim and np.abs(spec.basis[offcausal]).max(initial=0.0) > 0:
        raise ValueError("subspace basis leaves the causal cone")
    Mc = spec.basis[qf.index]
    Hr = Mc.T @ qf.H @ Mc
    return ReducedQuadratic(0.5 * (Hr + Hr.T), Mc.T @ qf.g, qf.c)


def solve_q_domain(cs: CompactSystem, spec: SubspaceSpec) -> QDomainSolution:
    """Minimize J~ over the subspace by Cholesky on the reduced Hessian.

    Raises:
        NumericallyIndefinite: the reduced Hessian has a nonpositive pivot.
    """
    rq = reduce_quadratic(quadratic_form(cs), spec)
    if spec.dim == 0:
        return QDomainSolution(np.zeros(spec.shape), rq.c, np.zeros(0))
    try:
        factor = cho_factor(rq.Hr)
    except LinAlgError as exc:
        raise NumericallyIndefinite(f"reduced Hessian is not positive definite: {exc}") from exc
    alpha = -cho_solve(factor, rq.gr)
    return QDomainSolution(spec.to_matrix(alpha), rq.value(alpha), alpha)


def recover_controller(
    Q, G, spec: SubspaceSpec | None = None, qi_claimed: bool = False, N: int | None = None
) -> np.ndarray:
    """K = h(Q). With ``qi_claimed`` the result must stay in ``spec``.

    Raises:
        SubspaceEscape: QI was claimed but K leaves the subspace.
    """
    K = h_map(Q, G, N)
    if qi_claimed and spec is not None:
        residual = float(np.abs(K - spec.project(K)).max(initial=0.0))
        if residual > ESCAPE_TOL:
            raise SubspaceEscape(
                f"recovered controller leaves the subspace (residual {residual:.3g})", residual
            )
    return K
