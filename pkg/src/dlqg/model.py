"""Finite-horizon plant data and its stacked (compact) representation.

The horizon-N trajectory of

    x_{t+1} = A_t x_t + B_t u_t + w_t,    y_t = C_t x_t + v_t

is written as ``x = P11 w + P12 u``, ``y = C x + v`` with
``w = [x_0; w_0; ...; w_{N-1}]``. Only ``y_0 .. y_{N-1}`` are measured.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import DimensionMismatch, NonCausalController, NotPD, NotPSD, NotSymmetric

PSD_TOL = 1e-9
PD_TOL = 1e-9
_SYM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SystemData:
    horizon: int
    n: int
    m: int
    p: int
    A: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]
    C: tuple[np.ndarray, ...]
    M: tuple[np.ndarray, ...]  # N + 1 entries, the last one is the terminal weight
    R: tuple[np.ndarray, ...]
    Sigma0: np.ndarray
    SigmaW: tuple[np.ndarray, ...]
    SigmaV: tuple[np.ndarray, ...]
    mu0: np.ndarray


@dataclass(frozen=True, eq=False)
class CompactSystem:
    N: int
    n: int
    m: int
    p: int
    Abig: np.ndarray
    Bbig: np.ndarray
    Cbig: np.ndarray
    Z: np.ndarray
    P11: np.ndarray
    P12: np.ndarray
    Mbig: np.ndarray
    Rbig: np.ndarray
    SigmaW: np.ndarray
    SigmaV: np.ndarray
    muW: np.ndarray
    G: np.ndarray
    Mhalf: np.ndarray
    Rhalf: np.ndarray
    SigmaWhalf: np.ndarray
    SigmaVhalf: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of a controller gain, ``(mN, pN)``."""
        return (self.m * self.N, self.p * self.N)

    @property
    def causal_mask(self) -> np.ndarray:
        return causal_mask(self.m, self.p, self.N)


def causal_mask(m: int, p: int, N: int) -> np.ndarray:
    """Block lower-triangular 0/1 mask of shape (mN, pN) with m x p blocks."""
    return np.kron(np.tril(np.ones((N, N), dtype=int)), np.ones((m, p), dtype=int))


def check_causal(K: np.ndarray, m: int, p: int, N: int, name: str = "K") -> None:
    if K.shape != (m * N, p * N):
        raise DimensionMismatch(
            f"{name} has shape {K.shape}, expected {(m * N, p * N)}",
            field=name,
        )
    if np.any(K[causal_mask(m, p, N) == 0] != 0):
        raise NonCausalController(f"{name} has nonzero entries above the block diagonal")


def neumann_apply(X: np.ndarray, B: np.ndarray, order: int) -> np.ndarray:
    """Return ``sum_{i=0}^{order} X^i B``, i.e. ``(I - X)^{-1} B`` for nilpotent X."""
    acc = np.array(B, dtype=float, copy=True)
    term = acc
    for _ in range(order):
        term = X @ term
        acc = acc + term
    return acc


# --- validation -------------------------------------------------------------


def _as_matrix(value: Any, name: str, t: int | None) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix", field=name, t=t)
    return arr


def _sequence(raw: Mapping[str, Any], name: str, length: int) -> list[np.ndarray]:
    if name not in raw:
        raise DimensionMismatch(f"missing field {name!r}", field=name)
    value = raw[name]
    if _nesting_depth(value) <= 2:
        # time-invariant shorthand
        return [_as_matrix(value, name, None)] * length
    items = list(value)
    if len(items) != length:
        raise DimensionMismatch(
            f"{name} has {len(items)} entries, expected {length}",
            field=name,
            expected=length,
            got=len(items),
        )
    return [_as_matrix(item, name, t) for t, item in enumerate(items)]


def _nesting_depth(value: Any) -> int:
    if isinstance(value, np.ndarray):
        return value.ndim
    depth = 0
    while isinstance(value, (list, tuple)):
        depth += 1
        if not value:
            break
        value = value[0]
    if isinstance(value, np.ndarray):
        depth += value.ndim
    return depth


def _check_shape(mats: Sequence[np.ndarray], name: str, shape: tuple[int, int]) -> None:
    for t, X in enumerate(mats):
        if X.shape != shape:
            raise DimensionMismatch(
                f"{name}[{t}] has shape {X.shape}, expected {shape}",
                field=name,
                t=t,
                expected=list(shape),
                got=list(X.shape),
            )


def _symmetrize(X: np.ndarray, name: str, t: int | None) -> np.ndarray:
    scale = 1.0 + np.abs(X).max(initial=0.0)
    if np.abs(X - X.T).max(initial=0.0) > _SYM_TOL * scale:
        raise NotSymmetric(f"{name} is not symmetric", field=name, t=t)
    return 0.5 * (X + X.T)


def _definite(mats, name, strict, indexed=True):
    out = []
    for t, X in enumerate(mats):
        tt = t if indexed else None
        X = _symmetrize(X, name, tt)
        lam = float(np.linalg.eigvalsh(X).min()) if X.size else 0.0
        where = f"{name}" + (f" at t={t}" if indexed else "")
        if strict and lam <= PD_TOL:
            raise NotPD(
                f"{where} is not positive definite (min eigenvalue {lam:.3g})",
                field=name,
                t=tt,
                eigenvalue=lam,
            )
        if not strict and lam < -PSD_TOL:
            raise NotPSD(
                f"{where} is not positive semidefinite (min eigenvalue {lam:.3g})",
                field=name,
                t=tt,
                eigenvalue=lam,
            )
        out.append(X)
    return out


def validate_system_data(raw: Mapping[str, Any]) -> SystemData:
    """Build a :class:`SystemData` from a problem-file style mapping.

    Each matrix field is either one matrix (used for every step) or a list of
    per-step matrices. Near-symmetric weights are symmetrized before the
    eigenvalue tests.

    Raises:
        DimensionMismatch: wrong sequence length or matrix shape.
        NotPSD, NotPD: a definiteness assumption fails; the error names the
            field, the step t and the offending eigenvalue.
    """
    try:
        N = int(raw["horizon"])
        dims = raw["dims"]
        n, m, p = int(dims["n"]), int(dims["m"]), int(dims["p"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DimensionMismatch(f"horizon/dims missing or malformed: {exc}", field="dims") from exc
    if N < 1 or min(n, m, p) < 1:
        raise DimensionMismatch("horizon and dims must be positive", field="dims")

    A = _sequence(raw, "A", N)
    B = _sequence(raw, "B", N)
    C = _sequence(raw, "C", N)
    M = _sequence(raw, "M", N + 1)
    R = _sequence(raw, "R", N)
    SigmaW = _sequence(raw, "SigmaW", N)
    SigmaV = _sequence(raw, "SigmaV", N)
    if "Sigma0" not in raw:
        raise DimensionMismatch("missing field 'Sigma0'", field="Sigma0")
    Sigma0 = _as_matrix(raw["Sigma0"], "Sigma0", None)
    mu0 = np.atleast_1d(np.asarray(raw.get("mu0", np.zeros(n)), dtype=float)).ravel()

    _check_shape(A, "A", (n, n))
    _check_shape(B, "B", (n, m))
    _check_shape(C, "C", (p, n))
    _check_shape(M, "M", (n, n))
    _check_shape(R, "R", (m, m))
    _check_shape(SigmaW, "SigmaW", (n, n))
    _check_shape(SigmaV, "SigmaV", (p, p))
    _check_shape([Sigma0], "Sigma0", (n, n))
    if mu0.shape != (n,):
        raise DimensionMismatch(f"mu0 has length {mu0.size}, expected {n}", field="mu0")

    M = _definite(M, "M", strict=False)
    R = _definite(R, "R", strict=True)
    SigmaW = _definite(SigmaW, "SigmaW", strict=False)
    SigmaV = _definite(SigmaV, "SigmaV", strict=True)
    (Sigma0,) = _definite([Sigma0], "Sigma0", strict=False, indexed=False)

    return SystemData(
        horizon=N, n=n, m=m, p=p,
        A=tuple(A), B=tuple(B), C=tuple(C), M=tuple(M), R=tuple(R),
        Sigma0=Sigma0, SigmaW=tuple(SigmaW), SigmaV=tuple(SigmaV), mu0=mu0,
    )


# --- compact form -----------------------------------------------------------


def psd_sqrt(X: np.ndarray) -> np.ndarray:
    """Symmetric square root; tiny negative eigenvalues are clamped to zero."""
    lam, V = np.linalg.eigh(0.5 * (X + X.T))
    lam = np.where(lam < 0.0, 0.0, lam)
    return (V * np.sqrt(lam)) @ V.T


def _block_sqrt(blocks: Sequence[np.ndarray]) -> np.ndarray:
    return block_diag(*[psd_sqrt(X) for X in blocks])


def _state_transition(A: Sequence[np.ndarray], n: int, N: int) -> np.ndarray:
    # P11 block (i, j) = A_{i-1} ... A_j for i > j, identity on the diagonal.
    P = np.zeros((n * (N + 1), n * (N + 1)))
    for j in range(N + 1):
        blk = np.eye(n)
        P[j * n:(j + 1) * n, j * n:(j + 1) * n] = blk
        for i in range(j + 1, N + 1):
            blk = A[i - 1] @ blk
            P[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk
    return P


def assemble_compact(sys: SystemData) -> CompactSystem:
    N, n, m, p = sys.horizon, sys.n, sys.m, sys.p
    nx = n * (N + 1)

    # A_N never enters Z @ Abig, so the last diagonal block is left at zero.
    Abig = block_diag(*sys.A, np.zeros((n, n)))
    Bbig = np.vstack([block_diag(*sys.B), np.zeros((n, m * N))])
    Cbig = np.hstack([block_diag(*sys.C), np.zeros((p * N, n))])
    Z = np.zeros((nx, nx))
    Z[n:, : n * N] = np.eye(n * N)

    P11 = _state_transition(sys.A, n, N)
    P12 = P11 @ (Z @ Bbig)
    G = Cbig @ P12

    SigmaW_blocks = (sys.Sigma0, *sys.SigmaW)
    muW = np.zeros(nx)
    muW[:n] = sys.mu0

    return CompactSystem(
        N=N, n=n, m=m, p=p,
        Abig=Abig, Bbig=Bbig, Cbig=Cbig, Z=Z, P11=P11, P12=P12,
        Mbig=block_diag(*sys.M),
        Rbig=block_diag(*sys.R),
        SigmaW=block_diag(*SigmaW_blocks),
        SigmaV=block_diag(*sys.SigmaV),
        muW=muW,
        G=G,
        Mhalf=_block_sqrt(sys.M),
        Rhalf=_block_sqrt(sys.R),
        SigmaWhalf=_block_sqrt(SigmaW_blocks),
        SigmaVhalf=_block_sqrt(sys.SigmaV),
    )


def closed_loop_trajectories(cs: CompactSystem, K: np.ndarray, w: np.ndarray, v: np.ndarray):
    """Stacked closed-loop ``(x, y, u)`` under ``u = K y``.

    ``w`` and ``v`` may be vectors or matrices whose columns are independent
    realizations.
    """
    check_causal(K, cs.m, cs.p, cs.N)
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    X = cs.P12 @ K @ cs.Cbig
    x = neumann_apply(X, cs.P11 @ w + cs.P12 @ (K @ v), cs.N)
    y = cs.Cbig @ x + v
    u = K @ y
    return x, y, u
