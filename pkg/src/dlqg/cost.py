"""Expected LQG cost in controller (K) and disturbance-feedback (Q) coordinates.

With ``G = C P12`` the two parametrizations are linked by

    K = h(Q)  = (I + Q G)^{-1} Q,
    Q = h^-1(K) = (I - K G)^{-1} K,

and every inverse of ``I -/+ (nilpotent)`` is a finite Neumann sum.
J(K) is a polynomial in K, while J~(Q) is a strictly convex quadratic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import CompactSystem, check_causal, closed_loop_trajectories, neumann_apply
from .subspace import unvec, vec


def _fro2(X) -> float:
    return float(np.sum(np.square(X)))


def _second_moment(cs: CompactSystem) -> np.ndarray:
    return cs.SigmaW + np.outer(cs.muW, cs.muW)


def cost_k(cs: CompactSystem, K) -> float:
    """J(K), evaluated term by term from the closed-loop maps."""
    K = np.asarray(K, dtype=float)
    check_causal(K, cs.m, cs.p, cs.N)
    N = cs.N
    CP11 = cs.Cbig @ cs.P11
    # (I - P12 K C)^{-1} P11 [Sw^1/2, mu_w]
    Xw = neumann_apply(cs.P12 @ K @ cs.Cbig, cs.P11 @ np.column_stack([cs.SigmaWhalf, cs.muW]), N)
    # K (I - G K)^{-1} [C P11 Sw^1/2, Sv^1/2, C P11 mu_w]
    nw = cs.SigmaWhalf.shape[1]
    nv = cs.SigmaVhalf.shape[1]
    Y = K @ neumann_apply(
        cs.G @ K, np.column_stack([CP11 @ cs.SigmaWhalf, cs.SigmaVhalf, CP11 @ cs.muW]), N
    )
    KSv = Y[:, nw:nw + nv]
    return (
        _fro2(cs.Mhalf @ Xw[:, :nw])
        + _fro2(cs.Mhalf @ cs.P12 @ KSv)
        + _fro2(cs.Rhalf @ Y[:, :nw])
        + _fro2(cs.Rhalf @ KSv)
        + _fro2(cs.Mhalf @ Xw[:, nw])
        + _fro2(cs.Rhalf @ Y[:, nw + nv])
    )


def cost_q(cs: CompactSystem, Q) -> float:
    """J~(Q), the disturbance-feedback cost."""
    Q = np.asarray(Q, dtype=float)
    check_causal(Q, cs.m, cs.p, cs.N, name="Q")
    I = np.eye(cs.P11.shape[0])
    Phi_xw = (I + cs.P12 @ Q @ cs.Cbig) @ cs.P11
    Phi_uw = Q @ cs.Cbig @ cs.P11
    return (
        _fro2(cs.Mhalf @ Phi_xw @ cs.SigmaWhalf)
        + _fro2(cs.Mhalf @ cs.P12 @ Q @ cs.SigmaVhalf)
        + _fro2(cs.Rhalf @ Phi_uw @ cs.SigmaWhalf)
        + _fro2(cs.Rhalf @ Q @ cs.SigmaVhalf)
        + _fro2(cs.Rhalf @ Phi_uw @ cs.muW)
        + _fro2(cs.Mhalf @ Phi_xw @ cs.muW)
    )


def h_map(Q, G, N: int | None = None) -> np.ndarray:
    """K = (I + Q G)^{-1} Q as the alternating series sum_i (-1)^i (Q G)^i Q."""
    Q = np.asarray(Q, dtype=float)
    G = np.asarray(G, dtype=float)
    order = Q.shape[0] if N is None else N
    return neumann_apply(-(Q @ G), Q, order)


def h_inv(K, G, N: int | None = None) -> np.ndarray:
    """Q = (I - K G)^{-1} K."""
    K = np.asarray(K, dtype=float)
    G = np.asarray(G, dtype=float)
    order = K.shape[0] if N is None else N
    return neumann_apply(K @ G, K, order)


# --- quadratic form in Q -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """J~(Q) = 1/2 q'Hq + g'q + c on the causal coordinates ``q = vec(Q)[index]``."""

    H: np.ndarray
    g: np.ndarray
    c: float
    index: np.ndarray
    shape: tuple[int, int]

    def value(self, q) -> float:
        q = np.asarray(q, dtype=float)
        return float(0.5 * q @ self.H @ q + self.g @ q + self.c)

    def coords(self, Q) -> np.ndarray:
        return vec(Q)[self.index]

    def to_matrix(self, q) -> np.ndarray:
        out = np.zeros(self.shape[0] * self.shape[1])
        out[self.index] = q
        return unvec(out, self.shape)


def _q_terms(cs: CompactSystem):
    # J~(Q) = tr(X Q' Y Q) + 2 tr(L' Q) + c
    W = _second_moment(cs)
    CP11 = cs.Cbig @ cs.P11
    X = cs.SigmaV + CP11 @ W @ CP11.T
    Y = cs.Rbig + cs.P12.T @ cs.Mbig @ cs.P12
    L = cs.P12.T @ cs.Mbig @ cs.P11 @ W @ CP11.T
    c = float(np.trace(cs.P11.T @ cs.Mbig @ cs.P11 @ W))
    return X, Y, L, c


def quadratic_form(cs: CompactSystem) -> QuadraticForm:
    """Hessian, linear term and constant of J~ restricted to causal Q.

    The full Hessian is ``2 (X kron Y)`` with ``X = Sv + C P11 (Sw + mu mu') P11' C'``
    and ``Y = R + P12' M P12``; only its causal rows/columns are formed.
    """
    X, Y, L, c = _q_terms(cs)
    shape = cs.shape
    index = np.flatnonzero(vec(cs.causal_mask))
    rows, cols = np.unravel_index(index, shape, order="F")
    H = 2.0 * X[np.ix_(cols, cols)] * Y[np.ix_(rows, rows)]
    H = 0.5 * (H + H.T)
    g = 2.0 * vec(L)[index]
    return QuadraticForm(H, g, c, index, shape)


def _grad_q_full(cs: CompactSystem, Q) -> np.ndarray:
    X, Y, L, _ = _q_terms(cs)
    return 2.0 * (Y @ Q @ X + L)


def grad_q(cs: CompactSystem, Q) -> np.ndarray:
    """Gradient of J~ with respect to the causal entries of Q."""
    Q = np.asarray(Q, dtype=float)
    check_causal(Q, cs.m, cs.p, cs.N, name="Q")
    return _grad_q_full(cs, Q) * cs.causal_mask


def grad_k(cs: CompactSystem, K) -> np.ndarray:
    """Gradient of J with respect to the causal entries of K.

    Chain rule through ``Q = h^-1(K)``: ``dQ = (I - K G)^{-1} dK (I - G K)^{-1}``,
    so ``grad J = (I - K G)^{-T} grad J~(Q) (I - G K)^{-T}``.
    """
    K = np.asarray(K, dtype=float)
    check_causal(K, cs.m, cs.p, cs.N)
    N = cs.N
    KG = K @ cs.G
    GK = cs.G @ K
    left = neumann_apply(KG, np.eye(KG.shape[0]), N)
    right = neumann_apply(GK, np.eye(GK.shape[0]), N)
    Q = left @ K
    gQ = _grad_q_full(cs, Q)
    return (left.T @ gQ @ right.T) * cs.causal_mask


# --- Monte Carlo ---------------------------------------------------------------

MC_CHUNK = 8192


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    samples: int


def _mc_chunk(cs: CompactSystem, K, count: int, seed_seq) -> tuple[int, float, float]:
    rng = np.random.default_rng(seed_seq)
    w = cs.muW[:, None] + cs.SigmaWhalf @ rng.standard_normal((cs.SigmaWhalf.shape[1], count))
    v = cs.SigmaVhalf @ rng.standard_normal((cs.SigmaVhalf.shape[1], count))
    x, _, u = closed_loop_trajectories(cs, K, w, v)
    c = np.einsum("it,it->t", x, cs.Mbig @ x) + np.einsum("it,it->t", u, cs.Rbig @ u)
    mean = float(c.mean())
    return count, mean, float(np.square(c - mean).sum())


def monte_carlo_cost(
    cs: CompactSystem, K, samples: int, seed: int = 0, jobs: int = 1
) -> MonteCarloResult:
    """Sample-average estimate of J(K) with its standard error.

    Samples are split into fixed chunks, each with its own stream spawned
    from ``seed``; chunk sums are reduced in chunk order so the result does
    not depend on ``jobs``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    K = np.asarray(K, dtype=float)
    check_causal(K, cs.m, cs.p, cs.N)
    sizes = [MC_CHUNK] * (samples // MC_CHUNK)
    if samples % MC_CHUNK:
        sizes.append(samples % MC_CHUNK)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    args = list(zip(sizes, streams))
    if jobs > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda a: _mc_chunk(cs, K, *a), args))
    else:
        parts = [_mc_chunk(cs, K, *a) for a in args]
    # ordered merge of (count, mean, sum of squared deviations)
    n, mean, m2 = parts[0]
    for nb, mb, m2b in parts[1:]:
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    stderr = float(np.sqrt(m2 / (n - 1) / n)) if n > 1 else float("inf")
    return MonteCarloResult(mean, stderr, samples)
