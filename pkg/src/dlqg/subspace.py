"""Controller subspaces: binary sparsity algebra, orthonormal bases, QI tests.

Binary matrices follow the usual structural conventions: a product of two
patterns is the pattern of their integer product (it saturates at 1), and
``X <= Y`` is elementwise.

All vectorization is column-major, matching ``vec``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import orth

from .errors import DimensionMismatch, NonCausalPattern
from .model import causal_mask

ZERO_TOL = 1e-10
QI_REL_TOL = 1e-8
QI_ABS_TOL = 1e-12

SPARSITY = "sparsity"
STATIC_DIAG = "static_diag"
STATIC_PATTERN = "static_pattern"
EXPLICIT_BASIS = "explicit_basis"


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(x: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    return np.asarray(x).reshape(shape, order="F")


# --- binary algebra ---------------------------------------------------------


def struct_of(Y: np.ndarray, zero_tol: float = ZERO_TOL) -> np.ndarray:
    return (np.abs(np.asarray(Y, dtype=float)) > zero_tol).astype(int)


def _binary(X) -> np.ndarray:
    return (np.asarray(X) != 0).astype(int)


def binary_le(X, Y) -> bool:
    X, Y = _binary(X), _binary(Y)
    if X.shape != Y.shape:
        raise DimensionMismatch(f"cannot compare patterns of shape {X.shape} and {Y.shape}")
    return bool(np.all(X <= Y))


def binary_product(X, Y) -> np.ndarray:
    X, Y = _binary(X), _binary(Y)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[0]:
        raise DimensionMismatch(f"cannot multiply patterns of shape {X.shape} and {Y.shape}")
    return (X @ Y > 0).astype(int)


def qi_test_binary(S, delta) -> bool:
    """Structural strong-QI test ``S Delta S <= S`` for a sparsity subspace.

    ``S`` is the (mN, pN) controller pattern and ``delta`` the (pN, mN)
    pattern of ``C P12``.
    """
    S, delta = _binary(S), _binary(delta)
    if S.shape != delta.T.shape:
        raise DimensionMismatch(
            f"pattern shape {S.shape} does not conform with plant pattern shape {delta.shape}"
        )
    return binary_le(binary_product(binary_product(S, delta), S), S)


# --- subspaces --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubspaceSpec:
    """A linear subspace of causal (mN, pN) gains with an orthonormal basis.

    ``basis`` has shape (mN*pN, r); column k is ``vec`` of the k-th basis
    matrix. ``pattern`` is the binary S for sparsity subspaces and ``small``
    the m x p pattern for the static (I_N kron K) families.
    """

    kind: str
    m: int
    p: int
    N: int
    basis: np.ndarray
    pattern: np.ndarray | None = None
    small: np.ndarray | None = None
    _projector: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m * self.N, self.p * self.N)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def envelope(self) -> np.ndarray:
        """Smallest sparsity pattern containing the subspace."""
        if self.pattern is not None:
            return self.pattern.copy()
        support = np.abs(self.basis).max(axis=1, initial=0.0) > ZERO_TOL
        return unvec(support.astype(int), self.shape)

    def to_matrix(self, alpha) -> np.ndarray:
        return unvec(self.basis @ np.asarray(alpha, dtype=float), self.shape)

    def coords(self, K) -> np.ndarray:
        return self.basis.T @ vec(K)

    def project(self, K) -> np.ndarray:
        K = np.asarray(K, dtype=float)
        if K.shape != self.shape:
            raise DimensionMismatch(f"gain has shape {K.shape}, expected {self.shape}")
        if self.kind == SPARSITY:
            return K * self.pattern
        return self.to_matrix(self.coords(K))

    def contains(self, K, tol: float = 1e-12) -> bool:
        return float(np.abs(K - self.project(K)).max(initial=0.0)) <= tol


def _check_pattern_causal(S: np.ndarray, m: int, p: int, N: int) -> None:
    if S.shape != (m * N, p * N):
        raise DimensionMismatch(
            f"sparsity pattern has shape {S.shape}, expected {(m * N, p * N)}", field="sparsity"
        )
    if np.any(S > causal_mask(m, p, N)):
        raise NonCausalPattern(
            "sparsity pattern has ones above the block diagonal", field="sparsity"
        )


def sparsity_subspace(S, m: int, p: int, N: int) -> SubspaceSpec:
    """Sparse(S); basis columns are unit vectors in column-major order of the ones of S."""
    S = np.asarray(S)
    if not np.all((S == 0) | (S == 1)):
        raise DimensionMismatch("sparsity pattern entries must be 0 or 1", field="sparsity")
    S = S.astype(int)
    _check_pattern_causal(S, m, p, N)
    free = np.flatnonzero(vec(S))
    basis = np.zeros((S.size, free.size))
    basis[free, np.arange(free.size)] = 1.0
    return SubspaceSpec(SPARSITY, m, p, N, basis, pattern=S)


def kron_pattern(S_small, N: int, T="causal") -> np.ndarray:
    """Expand ``T kron S_small``; ``T="causal"`` is the lower-triangular all-ones matrix."""
    if isinstance(T, str):
        if T != "causal":
            raise DimensionMismatch(f"unknown temporal pattern {T!r}", field="sparsity")
        T = np.tril(np.ones((N, N), dtype=int))
    T = np.asarray(T, dtype=int)
    if T.shape != (N, N):
        raise DimensionMismatch(f"temporal pattern has shape {T.shape}, expected {(N, N)}")
    return np.kron(T, _binary(S_small))


def static_pattern_subspace(S_small, N: int) -> SubspaceSpec:
    """Gains ``I_N kron K`` with ``K`` in Sparse(S_small)."""
    S_small = _binary(S_small)
    if S_small.ndim != 2:
        raise DimensionMismatch("static pattern must be a matrix", field="subspace")
    m, p = S_small.shape
    free = np.flatnonzero(vec(S_small))
    cols = []
    for k in free:
        E = np.zeros(m * p)
        E[k] = 1.0
        cols.append(vec(np.kron(np.eye(N), unvec(E, (m, p)))) / np.sqrt(N))
    basis = np.column_stack(cols) if cols else np.zeros((m * N * p * N, 0))
    return SubspaceSpec(STATIC_PATTERN, m, p, N, basis, small=S_small)


def static_diag_subspace(m: int, p: int, N: int) -> SubspaceSpec:
    """Gains ``I_N kron diag(a_1, ..., a_k)`` (memoryless, decentralized, time-invariant)."""
    spec = static_pattern_subspace(np.eye(m, p, dtype=int), N)
    return SubspaceSpec(STATIC_DIAG, m, p, N, spec.basis, small=spec.small)


def explicit_subspace(vectors, m: int, p: int, N: int) -> SubspaceSpec:
    """Span of the given gains (or of the columns of a (mN*pN, k) array), orthonormalized."""
    V = np.asarray(vectors, dtype=float)
    if V.ndim == 3:
        V = np.column_stack([vec(X) for X in V]) if len(V) else np.zeros((m * N * p * N, 0))
    if V.ndim != 2 or V.shape[0] != m * N * p * N:
        raise DimensionMismatch("explicit basis must have mN*pN rows", field="subspace")
    basis = orth(V) if V.shape[1] else V
    offcausal = vec(causal_mask(m, p, N)) == 0
    if basis.size and np.abs(basis[offcausal]).max(initial=0.0) > ZERO_TOL:
        raise NonCausalPattern("explicit basis is not causal", field="subspace")
    return SubspaceSpec(EXPLICIT_BASIS, m, p, N, basis)


def orthonormal_basis(kind: str, m: int, p: int, N: int, data=None) -> SubspaceSpec:
    """Dispatch to the constructor for ``kind``."""
    if kind == SPARSITY:
        return sparsity_subspace(data, m, p, N)
    if kind == STATIC_DIAG:
        return static_diag_subspace(m, p, N)
    if kind == STATIC_PATTERN:
        return static_pattern_subspace(data, N)
    if kind == EXPLICIT_BASIS:
        return explicit_subspace(data, m, p, N)
    raise ValueError(f"unknown subspace kind {kind!r}")


# --- definitional QI test ---------------------------------------------------


@dataclass
class QIWitness:
    """A product that leaves the subspace, with its largest off-subspace entry."""

    property: str  # "QI" or "strong QI"
    matrix: np.ndarray
    index: tuple[int, int]
    residual: float


@dataclass
class QIResult:
    strong_qi: bool
    qi: bool
    trials: int
    witness: QIWitness | None = None


def _escapes(spec: SubspaceSpec, X: np.ndarray):
    off = X - spec.project(X)
    res = float(np.linalg.norm(off))
    scale = float(np.linalg.norm(X))
    tol = QI_REL_TOL * scale if scale > QI_ABS_TOL / QI_REL_TOL else QI_ABS_TOL
    return res > tol, off, res


def qi_test_definition(spec: SubspaceSpec, G, trials: int = 100, seed: int = 0) -> QIResult:
    """Randomized falsification of (strong) quadratic invariance w.r.t. ``G``.

    Draws subspace members with standard-normal coordinates and checks
    ``K G K`` (QI) and ``K1 G K2`` (strong QI). A ``True`` verdict only
    means no violation was seen in ``trials`` draws.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    G = np.asarray(G, dtype=float)
    rng = np.random.default_rng(seed)
    qi = strong = True
    witness = None
    if spec.dim == 0:
        return QIResult(True, True, trials)
    for _ in range(trials):
        K, K1, K2 = (spec.to_matrix(rng.standard_normal(spec.dim)) for _ in range(3))
        for name, X in (("QI", K @ G @ K), ("strong QI", K1 @ G @ K2)):
            if name == "QI" and not qi:
                continue
            if name == "strong QI" and not strong:
                continue
            bad, off, res = _escapes(spec, X)
            if not bad:
                continue
            idx = np.unravel_index(int(np.argmax(np.abs(off))), off.shape)
            w = QIWitness(name, X, (int(idx[0]), int(idx[1])), res)
            if name == "QI":
                qi = strong = False
            else:
                strong = False
            if witness is None or name == "QI":
                witness = w
        if not qi:
            break
    return QIResult(strong, qi, trials, witness)
