import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlqg.errors import DimensionMismatch, NonCausalPattern
from dlqg.model import causal_mask
from dlqg.subspace import (
    EXPLICIT_BASIS,
    SPARSITY,
    STATIC_DIAG,
    binary_le,
    binary_product,
    explicit_subspace,
    kron_pattern,
    orthonormal_basis,
    qi_test_binary,
    qi_test_definition,
    sparsity_subspace,
    static_diag_subspace,
    static_pattern_subspace,
    struct_of,
    unvec,
    vec,
)

from conftest import random_compact, random_pattern


def test_struct_of_trivial():
    assert not struct_of(np.zeros((3, 3))).any()
    np.testing.assert_array_equal(struct_of(np.eye(3)), np.eye(3))
    np.testing.assert_array_equal(struct_of(np.array([[1e-11, 1e-9]])), [[0, 1]])


def test_struct_of_example1_G_is_strictly_lower(ex1):
    delta = struct_of(ex1.compact.G)
    assert delta.shape == (15, 15)
    strict = np.kron(np.tril(np.ones((3, 3)), -1), np.ones((5, 5)))
    assert binary_le(delta, strict)
    assert delta.any()


def test_binary_algebra():
    X = np.array([[1, 0], [1, 1]])
    assert binary_le(np.zeros((2, 2)), X)
    assert not binary_le(X, np.eye(2))
    np.testing.assert_array_equal(binary_product(np.eye(2, dtype=int), X), X)
    np.testing.assert_array_equal(binary_product([[1, 1]], [[1], [1]]), [[1]])
    with pytest.raises(DimensionMismatch):
        binary_product(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        binary_le(np.ones((2, 3)), np.ones((3, 2)))


def test_example1_pattern_is_qi(ex1):
    spec = ex1.subspace
    delta = struct_of(ex1.compact.G)
    assert spec.kind == SPARSITY and spec.dim == 30
    assert qi_test_binary(spec.pattern, delta)
    res = qi_test_definition(spec, ex1.compact.G, trials=100)
    assert res.strong_qi and res.qi and res.witness is None


def test_example2_subspace_is_not_qi(ex2):
    spec = ex2.subspace
    assert spec.kind == STATIC_DIAG and spec.dim == 2
    assert not qi_test_binary(spec.envelope, struct_of(ex2.compact.G))
    res = qi_test_definition(spec, ex2.compact.G, trials=100)
    assert not res.strong_qi and not res.qi
    w = res.witness
    assert w is not None and w.residual > 1e-8
    assert abs(w.matrix - spec.project(w.matrix))[w.index] == np.abs(w.matrix - spec.project(w.matrix)).max()


def test_centralized_pattern_is_qi_for_any_plant():
    rng = np.random.default_rng(5)
    for _ in range(10):
        cs = random_compact(rng)
        assert qi_test_binary(cs.causal_mask, struct_of(cs.G))


def test_zero_plant_is_qi_for_every_subspace():
    spec = static_diag_subspace(2, 2, 3)
    res = qi_test_definition(spec, np.zeros((6, 6)), trials=20)
    assert res.strong_qi and res.qi


def test_qi_test_validates_trials(ex2):
    with pytest.raises(ValueError):
        qi_test_definition(ex2.subspace, ex2.compact.G, trials=0)


def test_projection_of_sparsity_kind_is_hadamard():
    rng = np.random.default_rng(0)
    S = causal_mask(2, 2, 2) * (rng.uniform(size=(4, 4)) < 0.5)
    spec = sparsity_subspace(S, 2, 2, 2)
    K = rng.standard_normal((4, 4))
    np.testing.assert_array_equal(spec.project(K), K * S)


def test_static_diag_projection_averages_tied_entries():
    rng = np.random.default_rng(1)
    spec = static_diag_subspace(2, 2, 2)
    K = np.tril(rng.standard_normal((4, 4)))
    a = (K[0, 0] + K[2, 2]) / 2
    b = (K[1, 1] + K[3, 3]) / 2
    np.testing.assert_allclose(spec.project(K), np.kron(np.eye(2), np.diag([a, b])), atol=1e-15)


def test_member_is_fixed_by_projection(ex2):
    spec = ex2.subspace
    K = spec.to_matrix([0.3, -1.2])
    np.testing.assert_allclose(spec.project(K), K, atol=1e-12)
    assert spec.contains(K)


def test_basis_examples(ex1):
    assert ex1.subspace.dim == 30
    cols = ex1.subspace.basis
    assert np.all((cols == 0) | (cols == 1)) and np.all(cols.sum(axis=0) == 1)
    assert len({int(np.argmax(c)) for c in cols.T}) == 30

    diag = static_diag_subspace(2, 2, 2)
    assert diag.dim == 2
    np.testing.assert_allclose(np.linalg.norm(diag.basis, axis=0), 1.0)
    nz = diag.basis[np.abs(diag.basis) > 0]
    np.testing.assert_allclose(nz, 1 / np.sqrt(2))

    empty = sparsity_subspace(np.zeros((4, 4)), 2, 2, 2)
    assert empty.dim == 0 and empty.basis.shape == (16, 0)


def test_basis_column_order_is_column_major():
    S = np.array([[1, 0], [1, 1]])
    spec = sparsity_subspace(S, 1, 1, 2)
    assert [int(np.argmax(c)) for c in spec.basis.T] == list(np.flatnonzero(vec(S)))
    assert list(np.flatnonzero(vec(S))) == [0, 1, 3]


def test_noncausal_patterns_rejected():
    S = np.ones((4, 4), dtype=int)
    with pytest.raises(NonCausalPattern):
        sparsity_subspace(S, 2, 2, 2)
    with pytest.raises(NonCausalPattern):
        explicit_subspace([np.triu(np.ones((2, 2)))], 1, 1, 2)
    with pytest.raises(DimensionMismatch):
        sparsity_subspace(np.full((4, 4), 2), 2, 2, 2)


def test_kron_pattern_and_static_pattern():
    small = np.array([[1, 0], [1, 1]])
    S = kron_pattern(small, 3)
    np.testing.assert_array_equal(S, np.kron(np.tril(np.ones((3, 3), dtype=int)), small))
    spec = static_pattern_subspace(small, 3)
    assert spec.dim == 3
    K = spec.to_matrix([1.0, 2.0, 3.0]) * np.sqrt(3)
    np.testing.assert_allclose(K, np.kron(np.eye(3), [[1.0, 0.0], [2.0, 3.0]]))


def test_orthonormal_basis_dispatch():
    assert orthonormal_basis(STATIC_DIAG, 2, 2, 2).dim == 2
    assert orthonormal_basis(SPARSITY, 1, 1, 2, np.tril(np.ones((2, 2)))).dim == 3
    spec = orthonormal_basis(EXPLICIT_BASIS, 1, 1, 2, [np.eye(2), np.eye(2) * 2, [[0, 0], [1, 0]]])
    assert spec.dim == 2
    with pytest.raises(ValueError):
        orthonormal_basis("bogus", 1, 1, 1)


def test_vec_unvec_round_trip():
    X = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(vec(X), [0, 3, 1, 4, 2, 5])
    np.testing.assert_array_equal(unvec(vec(X), (2, 3)), X)


def _random_spec(rng, kind, m, p, N):
    if kind == "sparsity":
        S = causal_mask(m, p, N) * (rng.uniform(size=(m * N, p * N)) < 0.5)
        return sparsity_subspace(S, m, p, N)
    if kind == "static":
        return static_pattern_subspace((rng.uniform(size=(m, p)) < 0.6).astype(int), N)
    mats = [np.tril(rng.standard_normal((m * N, p * N))) * causal_mask(m, p, N) for _ in range(3)]
    return explicit_subspace(mats, m, p, N)


small = st.integers(1, 3)


@settings(max_examples=60, deadline=None)
@given(m=small, p=small, N=small, kind=st.sampled_from(["sparsity", "static", "explicit"]),
       seed=st.integers(0, 2**31))
def test_projection_properties(m, p, N, kind, seed):
    rng = np.random.default_rng(seed)
    spec = _random_spec(rng, kind, m, p, N)
    r = spec.dim
    np.testing.assert_allclose(spec.basis.T @ spec.basis, np.eye(r), atol=1e-12)
    X, Y = rng.standard_normal((2, *spec.shape))
    PX, PY = spec.project(X), spec.project(Y)
    np.testing.assert_allclose(spec.project(PX), PX, atol=1e-12)
    assert abs(np.sum(PX * Y) - np.sum(X * PY)) <= 1e-10
    assert binary_le(struct_of(PX), causal_mask(m, p, N))
    # image of the projector equals the span of the basis
    np.testing.assert_allclose(spec.to_matrix(spec.coords(PX)), PX, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_binary_and_definitional_qi_agree(seed):
    rng = np.random.default_rng(seed)
    cs = random_compact(rng, density=0.5)
    spec = sparsity_subspace(random_pattern(rng, cs), cs.m, cs.p, cs.N)
    binary = qi_test_binary(spec.pattern, struct_of(cs.G))
    res = qi_test_definition(spec, cs.G, trials=50, seed=seed)
    assert binary == res.strong_qi == res.qi
