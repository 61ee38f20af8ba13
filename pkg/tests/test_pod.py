import numpy as np
import pytest

from swrom import ntswe, pod
from swrom.grid import Grid2D
from swrom.pod import PodBasis

from conftest import random_state, rel


def test_diagonal_matrix():
    b = pod.compute_pod(np.diag([3.0, 2.0, 1.0]), 2)
    np.testing.assert_allclose(b.sigma, [3, 2, 1])
    np.testing.assert_allclose(np.abs(b.V), np.eye(3)[:, :2])
    assert b.projection_error() == pytest.approx(1 / np.sqrt(14))


def test_rank_one_matrix(rng):
    u, v = rng.standard_normal(10), rng.standard_normal(6)
    b = pod.compute_pod(np.outer(u, v), 1)
    assert abs(abs(b.V[:, 0] @ u) / np.linalg.norm(u) - 1) < 1e-14
    assert b.projection_error(1) < 1e-14
    assert pod.numerical_rank(b.sigma) == 1


def test_eckart_young_matches_direct_projection(rng):
    S = rng.standard_normal((40, 15)) @ np.diag(0.5 ** np.arange(15))
    b = pod.compute_pod(S, 8)
    for r in (1, 4, 8):
        V = b.V[:, :r]
        direct = np.linalg.norm(S - V @ (V.T @ S)) / np.linalg.norm(S)
        assert b.projection_error(r) == pytest.approx(direct, rel=1e-10)


def test_orthonormal_and_nested(rng):
    S = rng.standard_normal((50, 20))
    b = pod.compute_pod(S, 12)
    np.testing.assert_allclose(b.V.T @ b.V, np.eye(12), atol=1e-13)
    assert np.all(np.diff(b.sigma) <= 0)
    np.testing.assert_array_equal(b.truncate(5).V, b.V[:, :5])
    with pytest.raises(ValueError):
        b.truncate(13)


def test_invalid_inputs(rng):
    with pytest.raises(ValueError):
        pod.compute_pod(rng.standard_normal((5, 3)), 4)
    with pytest.raises(ValueError):
        pod.compute_pod(np.array([[np.nan, 1.0]]), 1)


def test_rank_warning(caplog):
    with caplog.at_level("WARNING"):
        pod.compute_pod(np.outer(np.arange(1.0, 6), np.ones(4)), 3)
    assert "numerical rank" in caplog.text


@pytest.fixture(scope="module")
def identity_model():
    g = Grid2D(4, 4, -5.0, 5.0, -5.0, 5.0)
    n = 3 * g.size
    return g, pod.intrusive_reduce(PodBasis(np.eye(n), np.ones(n)), g)


def test_intrusive_with_identity_basis_is_the_dense_operator(identity_model, rng):
    g, m = identity_model
    for i in (1, 2, 3):
        np.testing.assert_allclose(m.A_hats[i - 1], ntswe.assemble_linear(g, i), atol=1e-14)
    w = random_state(g, rng)
    for j in (1, 2, 3):
        dense = ntswe.assemble_quadratic(g, j) @ np.kron(w, w)
        assert rel(m.H_hats[j - 1] @ np.kron(w, w), dense) < 1e-12


def test_reduced_coriolis_is_antisymmetric(rng):
    g = Grid2D(4, 4, -5.0, 5.0, -5.0, 5.0)
    V = np.linalg.qr(rng.standard_normal((48, 10)))[0]
    m = pod.intrusive_reduce(PodBasis(V, np.ones(10)), g)
    np.testing.assert_allclose(m.A_hats[1], -m.A_hats[1].T, atol=1e-14)
    # Pull-back identity for the linear pieces.
    for i in (1, 2, 3):
        np.testing.assert_allclose(m.A_hats[i - 1], V.T @ ntswe.assemble_linear(g, i) @ V, atol=1e-13)


@pytest.mark.parametrize("r", [48, 12])
def test_galerkin_consistency(rng, r):
    g = Grid2D(4, 4, -5.0, 5.0, -5.0, 5.0)
    S = np.column_stack([random_state(g, rng) for _ in range(60)])
    b = pod.compute_pod(S, r)
    m = pod.intrusive_reduce(b, g)
    for theta in (np.pi / 6, np.pi / 4, np.pi / 3):
        p = ntswe.PhysicalParams(theta)
        for _ in range(3):
            w_hat = rng.standard_normal(r)
            fom = b.V.T @ ntswe.rhs(g, b.V @ w_hat, p)
            assert rel(m.rhs(w_hat, theta), fom) < 1e-10


def test_truncation_equals_reduction_with_fewer_modes(rng):
    g = Grid2D(4, 4, -5.0, 5.0, -5.0, 5.0)
    S = np.column_stack([random_state(g, rng) for _ in range(30)])
    b = pod.compute_pod(S, 10)
    big = pod.intrusive_reduce(b, g).truncate(6)
    small = pod.intrusive_reduce(b.truncate(6), g)
    np.testing.assert_allclose(big.stacked(), small.stacked(), atol=1e-13)


def test_intrusive_dimension_check(rng):
    with pytest.raises(ValueError):
        pod.intrusive_reduce(PodBasis(np.eye(10), np.ones(10)), Grid2D(4, 4, 0, 1, 0, 1))
