import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betasde import ConfigError, GraphPotentialParams, SingularMatrix
from betasde.lattice import determinant, h_beta, is_positive_definite, k_t, solve


def cofactor_det(M):
    # Laplace expansion along the first row, the textbook oracle
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    return sum((-1) ** j * M[0, j] * cofactor_det(np.delete(np.delete(M, 0, 0), j, 1))
               for j in range(n))


def adjugate(M):
    n = M.shape[0]
    C = np.empty_like(M)
    for i, j in itertools.product(range(n), repeat=2):
        C[i, j] = (-1) ** (i + j) * cofactor_det(np.delete(np.delete(M, i, 0), j, 1))
    return C.T


def test_validation_names_field():
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ValueError, match=r"theta\[0\]"):
        GraphPotentialParams(W, [0.0, 1.0], [0.0, 0.0])
    with pytest.raises(ValueError, match="eta"):
        GraphPotentialParams(W, [1.0, 1.0], [-1.0, 0.0])
    with pytest.raises(ValueError, match="symmetric"):
        GraphPotentialParams(np.array([[0.0, 1.0], [0.5, 0.0]]), [1, 1], [0, 0])
    with pytest.raises(ValueError, match="connected"):
        GraphPotentialParams(np.zeros((2, 2)), [1, 1], [0, 0])
    with pytest.raises(ValueError):
        GraphPotentialParams(np.array([[0.0, -1.0], [-1.0, 0.0]]), [1, 1], [0, 0])


def test_params_are_read_only(c2):
    with pytest.raises(ValueError):
        c2.W[0, 1] = 3.0


def test_from_edges_self_loop():
    p = GraphPotentialParams.from_edges(2, [(0, 1, 2.0), (1, 1, 0.5)], [1, 1], [0, 1])
    np.testing.assert_array_equal(p.W, [[0.0, 2.0], [2.0, 0.5]])
    np.testing.assert_allclose(p.effective_drift(), [2.0, 3.0])


def test_h_beta_and_k_t(triangle):
    beta = np.array([2.0, 3.0, 2.5])
    H = h_beta(triangle, beta)
    np.testing.assert_allclose(H, 2 * np.diag(beta) - triangle.W)
    t = np.array([0.1, 0.3, 0.05])
    np.testing.assert_allclose(k_t(triangle, t), np.eye(3) - np.diag(t) @ triangle.W, atol=1e-15)
    np.testing.assert_allclose(k_t(triangle, t), t[:, None] * h_beta(triangle, 0.5 / t), atol=1e-12)


def test_determinant_and_solve_match_cofactor_oracle(triangle):
    H = h_beta(triangle, np.array([2.0, 3.0, 2.5]))
    assert determinant(H) == pytest.approx(cofactor_det(H), rel=1e-12)
    v = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(solve(H, v), adjugate(H) @ v / cofactor_det(H), rtol=1e-12)


def test_solve_singular():
    with pytest.raises(SingularMatrix):
        solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


def test_positive_definite_boundary():
    assert is_positive_definite(np.eye(3))
    assert not is_positive_definite(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert not is_positive_definite(np.array([[1.0, 2.0], [2.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_pd_agrees_with_eigenvalues(n, seed):
    g = np.random.default_rng(seed)
    A = g.normal(size=(n, n))
    M = A + A.T + g.uniform(-2, 4) * np.eye(n)
    lam = np.linalg.eigvalsh(M)
    scale = np.abs(M).max()
    if abs(lam.min()) < 1e-6 * scale:
        return
    assert is_positive_definite(M) == (lam.min() > 0)
    if abs(np.linalg.det(M)) > 1e-8:
        assert determinant(M) == pytest.approx(np.linalg.det(M), rel=1e-9)
        v = g.normal(size=n)
        np.testing.assert_allclose(solve(M, v), np.linalg.solve(M, v), rtol=1e-7, atol=1e-9)
