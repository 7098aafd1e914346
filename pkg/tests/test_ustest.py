import numpy as np
import pytest

from dlqg.errors import WrongSubspaceKind
from dlqg.cost import quadratic_form
from dlqg.qp import reduce_quadratic
from dlqg.subspace import sparsity_subspace, struct_of
from dlqg.ustest import (
    INCONCLUSIVE,
    NONCONVEX_WITNESS,
    US_BY_SAMPLED_CONVEXITY,
    US_BY_STRONG_QI,
    RestrictedCost,
    certify_us,
    restricted_hessian,
    sampled_convexity_test,
    us_via_strong_qi,
)

from conftest import hess_ex2


def ab_hessian(ex2, a, b):
    # alpha = sqrt(N) * (a, b), so the (a, b) Hessian is N times the alpha one
    rc = RestrictedCost(ex2.compact, ex2.subspace)
    N = ex2.compact.N
    return N * restricted_hessian(rc, np.sqrt(N) * np.array([a, b]))


def test_example2_hessian_at_origin(ex2):
    np.testing.assert_allclose(ab_hessian(ex2, 0.0, 0.0), [[56, 18], [18, 298]], atol=1e-3)


@pytest.mark.parametrize("a,b", [(-1.5, 0.5), (0.3, 1.1), (2.0, -2.0)])
def test_example2_hessian_formula(ex2, a, b):
    np.testing.assert_allclose(ab_hessian(ex2, a, b), hess_ex2(a, b), atol=1e-3)


def test_hessian_agrees_with_directional_second_differences(ex2):
    rc = RestrictedCost(ex2.compact, ex2.subspace)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.uniform(-3, 3, 2)
        d = rng.standard_normal(2)
        d /= np.linalg.norm(d)
        h = 1e-3
        second = (rc.value(x + h * d) - 2 * rc.value(x) + rc.value(x - h * d)) / h**2
        assert d @ rc.hessian(x) @ d == pytest.approx(second, rel=1e-4)


class QuadCost:
    """Restricted Q-domain cost: a quadratic in the subspace coordinates."""

    def __init__(self, prob):
        self.rq = reduce_quadratic(quadratic_form(prob.compact), prob.subspace)
        self.dim = prob.subspace.dim

    def grad(self, a):
        return self.rq.Hr @ a + self.rq.gr


def test_hessian_is_constant_for_quadratic_cost(ex1):
    qc = QuadCost(ex1)
    rng = np.random.default_rng(1)
    for _ in range(5):
        np.testing.assert_allclose(restricted_hessian(qc, rng.standard_normal(30)), qc.rq.Hr, atol=1e-6)


def test_strong_qi_route(ex1, ex2):
    delta = struct_of(ex1.compact.G)
    assert us_via_strong_qi(ex1.subspace, delta).verdict == US_BY_STRONG_QI
    cs = ex2.compact
    envelope = sparsity_subspace(ex2.subspace.envelope, cs.m, cs.p, cs.N)
    assert us_via_strong_qi(envelope, struct_of(cs.G)).verdict == INCONCLUSIVE
    full = sparsity_subspace(cs.causal_mask, cs.m, cs.p, cs.N)
    assert us_via_strong_qi(full, struct_of(cs.G)).verdict == US_BY_STRONG_QI
    with pytest.raises(WrongSubspaceKind):
        us_via_strong_qi(ex2.subspace, struct_of(cs.G))


def test_example2_sampled_convexity(ex2):
    cert = sampled_convexity_test(RestrictedCost(ex2.compact, ex2.subspace), 200, 10.0, seed=0)
    assert cert.verdict == US_BY_SAMPLED_CONVEXITY and cert.certifies_us
    assert cert.evidence["min_eig"] > 0 and cert.evidence["heuristic"]
    assert certify_us(ex2.compact, ex2.subspace, 50, 20.0).verdict == US_BY_SAMPLED_CONVEXITY


def test_example1_witness_is_stable(ex1):
    rc = RestrictedCost(ex1.compact, ex1.subspace)
    cert = sampled_convexity_test(rc, 5, 20.0, seed=0)
    assert cert.verdict == NONCONVEX_WITNESS and not cert.certifies_us
    # the origin is sampled first and already refutes convexity
    assert cert.evidence["witness_index"] == 0
    lam = np.linalg.eigvalsh(rc.hessian(np.array(cert.evidence["witness"])))[0]
    assert lam == pytest.approx(cert.evidence["witness_eig"]) and lam < -1e-6
    # combined certificate uses the structural route
    assert certify_us(ex1.compact, ex1.subspace).verdict == US_BY_STRONG_QI


def test_quadratic_restricted_cost_passes_at_any_radius(ex1):
    for radius in (1e-3, 1.0, 1e4):
        assert sampled_convexity_test(QuadCost(ex1), 5, radius).verdict == US_BY_SAMPLED_CONVEXITY


def test_verdict_is_never_convex_when_an_eigenvalue_is_small():
    class Flat:
        dim = 2

        def grad(self, a):
            return np.array([a[0], 0.0])

    cert = sampled_convexity_test(Flat(), 5, 1.0)
    assert cert.verdict == INCONCLUSIVE


def test_jobs_do_not_change_the_verdict(ex2):
    rc = RestrictedCost(ex2.compact, ex2.subspace)
    a = sampled_convexity_test(rc, 20, 5.0, seed=3, jobs=1)
    b = sampled_convexity_test(rc, 20, 5.0, seed=3, jobs=3)
    assert a == b
