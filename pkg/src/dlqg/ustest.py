"""Sufficient tests for unique stationarity of the constrained problem.

Two routes: a sparsity subspace that is strongly QI is uniquely stationary;
otherwise convexity of the restricted cost ``f(alpha) = J(unvec(M alpha))`` is
probed by sampling Hessian eigenvalues. Sampling can refute convexity (a
witness point) but only suggests it, so that verdict is labeled heuristic.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cost import cost_k, grad_k
from .errors import WrongSubspaceKind
from .model import CompactSystem
from .subspace import SPARSITY, SubspaceSpec, qi_test_binary, struct_of, vec

US_BY_STRONG_QI = "US_BY_STRONG_QI"
US_BY_SAMPLED_CONVEXITY = "US_BY_SAMPLED_CONVEXITY"
INCONCLUSIVE = "INCONCLUSIVE"
NONCONVEX_WITNESS = "NONCONVEX_WITNESS"

EIG_TOL = 1e-6
FD_STEP = 1e-4


@dataclass
class USCertificate:
    verdict: str
    evidence: dict = field(default_factory=dict)

    @property
    def certifies_us(self) -> bool:
        return self.verdict in (US_BY_STRONG_QI, US_BY_SAMPLED_CONVEXITY)


class RestrictedCost:
    """J composed with the subspace basis, as a function of the coordinates."""

    def __init__(self, cs: CompactSystem, spec: SubspaceSpec):
        self.cs = cs
        self.spec = spec

    @property
    def dim(self) -> int:
        return self.spec.dim

    def value(self, alpha) -> float:
        return cost_k(self.cs, self.spec.to_matrix(alpha))

    def grad(self, alpha) -> np.ndarray:
        return self.spec.basis.T @ vec(grad_k(self.cs, self.spec.to_matrix(alpha)))

    def hessian(self, alpha, step: float = FD_STEP) -> np.ndarray:
        return restricted_hessian(self, alpha, step)


def restricted_hessian(rc: RestrictedCost, alpha, step: float = FD_STEP) -> np.ndarray:
    """Central differences of the analytic gradient, symmetrized."""
    alpha = np.asarray(alpha, dtype=float)
    r = rc.dim
    H = np.empty((r, r))
    for j in range(r):
        e = np.zeros(r)
        e[j] = step
        H[:, j] = (rc.grad(alpha + e) - rc.grad(alpha - e)) / (2.0 * step)
    return 0.5 * (H + H.T)


def us_via_strong_qi(spec: SubspaceSpec, delta) -> USCertificate:
    """Strong-QI shortcut; failing it says nothing about unique stationarity."""
    if spec.kind != SPARSITY:
        raise WrongSubspaceKind(f"structural test needs a sparsity subspace, got {spec.kind!r}")
    ok = qi_test_binary(spec.pattern, delta)
    return USCertificate(
        US_BY_STRONG_QI if ok else INCONCLUSIVE,
        {"test": "S Delta S <= S", "qi_binary": ok},
    )


def _ball_points(r: int, npoints: int, radius: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((npoints, r))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    rad = radius * rng.uniform(size=(npoints, 1)) ** (1.0 / r)
    return d * rad


def sampled_convexity_test(
    rc: RestrictedCost,
    npoints: int = 200,
    radius: float = 20.0,
    seed: int = 0,
    extra_points=(),
    eig_tol: float = EIG_TOL,
    jobs: int = 1,
) -> USCertificate:
    """Smallest Hessian eigenvalue over random points in a ball.

    The origin and any ``extra_points`` (e.g. the best iterate found) are
    always included. Returns ``NONCONVEX_WITNESS`` at the first point in
    sample order whose smallest eigenvalue is below ``-eig_tol``.
    """
    if npoints < 1:
        raise ValueError("npoints must be >= 1")
    r = rc.dim
    if r == 0:
        return USCertificate(
            US_BY_SAMPLED_CONVEXITY,
            {"test": "sampled Hessian", "heuristic": True, "points": 0, "min_eig": None},
        )
    points = [np.zeros(r), *[np.asarray(p, dtype=float) for p in extra_points]]
    points.extend(_ball_points(r, npoints, radius, seed))

    def lam_min(alpha):
        return float(np.linalg.eigvalsh(restricted_hessian(rc, alpha))[0])

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            lams = list(pool.map(lam_min, points))
    else:
        lams = [lam_min(a) for a in points]

    lams = np.asarray(lams)
    evidence = {
        "test": "sampled Hessian",
        "heuristic": True,
        "points": len(points),
        "radius": radius,
        "seed": seed,
        "min_eig": float(lams.min()),
    }
    bad = np.flatnonzero(lams < -eig_tol)
    if bad.size:
        k = int(bad[0])
        evidence.update(witness=points[k].tolist(), witness_eig=float(lams[k]), witness_index=k)
        return USCertificate(NONCONVEX_WITNESS, evidence)
    if lams.min() > eig_tol:
        return USCertificate(US_BY_SAMPLED_CONVEXITY, evidence)
    return USCertificate(INCONCLUSIVE, evidence)


def certify_us(
    cs: CompactSystem,
    spec: SubspaceSpec,
    npoints: int = 200,
    radius: float = 20.0,
    seed: int = 0,
    jobs: int = 1,
) -> USCertificate:
    """Structural strong-QI test when it applies, sampled convexity otherwise."""
    if spec.kind == SPARSITY:
        cert = us_via_strong_qi(spec, struct_of(cs.G))
        if cert.certifies_us:
            return cert
    return sampled_convexity_test(RestrictedCost(cs, spec), npoints, radius, seed, jobs=jobs)
