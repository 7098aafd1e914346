"""Projected gradient descent on a controller subspace with a Wolfe line search.

The iteration runs in subspace coordinates: with an orthonormal basis M and
``vec(K) = M alpha``, stepping ``alpha <- alpha - eta * M' vec(grad J)`` is the
same as ``K <- K - eta * proj(grad J(K))``, and every iterate stays in the
subspace.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import cost_k, grad_k
from .errors import LineSearchStall, NotDescent
from .model import CompactSystem
from .subspace import SPARSITY, SubspaceSpec, qi_test_binary, struct_of, vec

log = logging.getLogger(__name__)

QI_GLOBAL = "QI_GLOBAL"
US_GLOBAL = "US_GLOBAL"
STATIONARY_ONLY = "STATIONARY_ONLY"

TRACE_FULL = 10_000
TRACE_DECIMATE = 10


@dataclass(frozen=True)
class OptimizerConfig:
    c1: float = 1e-4
    c2: float = 0.9
    stop_tol: float = 5e-5
    max_iters: int = 5000
    max_bisect: int = 64
    init_range: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError(f"need 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.max_bisect < 1:
            raise ValueError("max_bisect must be >= 1")
        if self.init_range < 0:
            raise ValueError("init_range must be >= 0")


@dataclass
class SynthesisReport:
    K: np.ndarray
    J: float
    residual: float
    iterations: int
    converged: bool
    cost_trace: list[float]
    certificate: str | None
    wall_time: float = field(default=0.0, compare=False)
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "K": self.K.tolist(),
            "J": self.J,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "certificate": self.certificate,
            "seed": self.seed,
            "wall_time": self.wall_time,
            "cost_trace": list(self.cost_trace),
        }


def wolfe_bisection(
    phi: Callable[[float], tuple[float, float]],
    c1: float = 1e-4,
    c2: float = 0.9,
    max_bisect: int = 64,
    eta0: float = 1.0,
    phi0: tuple[float, float] | None = None,
) -> float:
    """Find a step satisfying the weak Wolfe conditions along a ray.

    ``phi(eta)`` returns the function value and its derivative at ``eta``.
    The bracket ``[lo, hi]`` is expanded by doubling while only the curvature
    condition fails and bisected once an upper end is known.

    Raises:
        NotDescent: ``phi'(0) >= 0``.
        LineSearchStall: no Wolfe step within ``max_bisect`` trials.
    """
    f0, d0 = phi(0.0) if phi0 is None else phi0
    if not d0 < 0.0:
        raise NotDescent(f"phi'(0) = {d0!r} is not negative")
    lo, hi = 0.0, np.inf
    eta = eta0
    for _ in range(max_bisect):
        f, d = phi(eta)
        if not np.isfinite(f) or f > f0 + c1 * eta * d0:
            hi = eta
        elif d < c2 * d0:
            lo = eta
        else:
            return eta
        eta = 2.0 * lo if np.isinf(hi) else 0.5 * (lo + hi)
    raise LineSearchStall(
        f"no Wolfe step after {max_bisect} trials (bracket [{lo:.3g}, {hi:.3g}])"
    )


def random_init(spec: SubspaceSpec, init_range: float = 10.0, seed: int = 0) -> np.ndarray:
    """Gain with each free coordinate uniform on [-range, range].

    For sparsity subspaces the coordinates are the free entries themselves.
    """
    if init_range < 0:
        raise ValueError("range must be >= 0")
    rng = np.random.default_rng(seed)
    if spec.kind == SPARSITY:
        alpha = rng.uniform(-init_range, init_range, spec.dim)
        return spec.to_matrix(alpha)
    # tied families: draw the free entries of the small gain, not alpha
    scale = np.abs(spec.basis).max(axis=0, initial=0.0)
    alpha = rng.uniform(-init_range, init_range, spec.dim) / np.where(scale > 0, scale, 1.0)
    return spec.to_matrix(alpha)


def residual_of(spec: SubspaceSpec, grad: np.ndarray) -> float:
    return float(np.abs(spec.project(grad)).max(initial=0.0))


def projected_gradient_descent(
    cs: CompactSystem,
    spec: SubspaceSpec,
    K0: np.ndarray,
    cfg: OptimizerConfig = OptimizerConfig(),
    us_certified: bool = False,
) -> SynthesisReport:
    """Minimize J over the subspace from ``K0``.

    The certificate is ``QI_GLOBAL`` when the subspace is a sparsity pattern
    passing the structural QI test, ``US_GLOBAL`` when the caller vouches for
    unique stationarity, else ``STATIONARY_ONLY``. It is ``None`` unless the
    run converged.
    """
    t_start = time.perf_counter()
    M = spec.basis
    shape = spec.shape

    def restricted(alpha):
        K = spec.to_matrix(alpha)
        g = grad_k(cs, K)
        return K, cost_k(cs, K), M.T @ vec(g), g

    alpha = spec.coords(spec.project(np.asarray(K0, dtype=float)))
    K, J, galpha, g = restricted(alpha)
    residual = residual_of(spec, g)
    trace = [J]
    iters = 0
    eta0 = 1.0

    while residual >= cfg.stop_tol and iters < cfg.max_iters:
        direction = -galpha
        slope = float(galpha @ direction)

        def phi(step, _a=alpha, _d=direction):
            _, f, ga, _ = restricted(_a + step * _d)
            return f, float(ga @ _d)

        try:
            eta = wolfe_bisection(
                phi, cfg.c1, cfg.c2, cfg.max_bisect, eta0=eta0, phi0=(J, slope)
            )
        except LineSearchStall as exc:
            exc.snapshot = {"iteration": iters, "K": K.copy(), "J": J, "residual": residual}
            raise
        step = eta * direction
        g_prev = galpha
        alpha = alpha + step
        K, J, galpha, g = restricted(alpha)
        # Barzilai-Borwein trial step for the next search; the accepted step
        # is still whatever satisfies the Wolfe conditions.
        curv = float(step @ (galpha - g_prev))
        eta0 = float(step @ step) / curv if curv > 0 else 2.0 * eta
        residual = residual_of(spec, g)
        iters += 1
        if iters < TRACE_FULL or iters % TRACE_DECIMATE == 0:
            trace.append(J)
        log.debug("iter %d  J=%.10g  residual=%.3g  eta=%.3g", iters, J, residual, eta)

    converged = residual < cfg.stop_tol
    certificate = None
    if converged:
        certificate = STATIONARY_ONLY
        if spec.kind == SPARSITY and qi_test_binary(spec.pattern, struct_of(cs.G)):
            certificate = QI_GLOBAL
        elif us_certified:
            certificate = US_GLOBAL
    return SynthesisReport(
        K=K.reshape(shape),
        J=J,
        residual=residual,
        iterations=iters,
        converged=converged,
        cost_trace=trace,
        certificate=certificate,
        wall_time=time.perf_counter() - t_start,
        seed=cfg.seed,
    )
