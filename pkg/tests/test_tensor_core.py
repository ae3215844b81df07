import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from plaplab.tensor_core import (
    EigenPair,
    PointJet,
    batch_residuals,
    check_inequality,
    eigen_reduced_residual,
    eigendecompose,
    fundamental_residual,
    invariants,
    random_jets,
    tolerance_scale,
)


def jet(grad, hess):
    return PointJet.from_matrix(grad, hess)


# -- frozen examples ---------------------------------------------------------

def test_invariants_diagonal():
    inv = invariants(jet([1, 0, 0], np.diag([1.0, 2, 3])))
    assert tuple(inv) == (6, 1, 1, 14, 1)


def test_invariants_planar_example():
    inv = invariants(jet([1, 0], [[1, 2], [2, -1]]))
    assert tuple(inv) == (0, 1, 5, 10, 1)


def test_invariants_zero_gradient():
    inv = invariants(jet([0, 0, 0], [[1, 5, 2], [5, -3, 4], [2, 4, 7]]))
    assert inv.inf_laplacian == 0 and inv.hess_grad_sq == 0 and inv.grad_sq == 0


def test_residual_planar_identity_example():
    assert fundamental_residual(jet([1, 0], [[1, 2], [2, -1]])) == (0, 0)


def test_residual_equality_case():
    lhs, rhs = fundamental_residual(jet([0, 0, 1], np.eye(3)))
    assert lhs == pytest.approx(1, abs=1e-12) and rhs == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_residual_zero_gradient(n):
    H = np.arange(n * n, dtype=float).reshape(n, n)
    assert fundamental_residual(jet(np.zeros(n), H + H.T)) == (0, 0)


def test_upper_triangle_only_is_read():
    a = jet([1, 2], [[1, 2], [99, 3]])
    assert np.array_equal(a.hess, [[1, 2], [2, 3]])


def test_jet_shape_errors():
    with pytest.raises(ValueError):
        PointJet([1, 2], [1, 2])
    with pytest.raises(ValueError):
        PointJet.from_matrix([1, 2], np.eye(3))


@pytest.mark.parametrize(
    "lam, a, expected",
    [
        ((1, -1), (1, 0), (0, 0)),
        ((1, 1, 1), (1, 0, 0), (1, 1)),
        ((2, 0, 0), (0, 1, 0), (0, 2)),
    ],
)
def test_eigen_reduced_examples(lam, a, expected):
    lhs, rhs = eigen_reduced_residual(EigenPair(np.array(lam, float), np.array(a, float)))
    assert (lhs, rhs) == pytest.approx(expected, abs=1e-12)


def test_eigen_reduced_rejects_non_unit():
    with pytest.raises(ValueError):
        eigen_reduced_residual(EigenPair(np.ones(3), np.array([1.0, 1.0, 0.0])))


def test_eigen_reduced_zero_avec():
    assert eigen_reduced_residual(EigenPair(np.ones(3), np.zeros(3))) == (0.0, 0.0)


def test_eigendecompose_diagonal():
    pair = eigendecompose(jet([0, 1], np.diag([3.0, 1.0])))
    assert np.allclose(pair.lambdas, [3, 1]) and np.allclose(pair.avec, [0, 1])


def test_eigendecompose_swap_matrix():
    pair = eigendecompose(jet([1, 0], [[0, 1], [1, 0]]))
    assert np.allclose(pair.lambdas, [1, -1])
    assert np.allclose(pair.avec, [1 / math.sqrt(2)] * 2)


def test_eigendecompose_identity():
    g = np.array([0.5, 0.5, 0.5, 0.5])
    pair = eigendecompose(jet(g, np.eye(4)))
    assert np.allclose(pair.lambdas, 1) and np.linalg.norm(pair.avec) == pytest.approx(1)


def test_eigendecompose_zero_gradient():
    pair = eigendecompose(jet([0, 0], [[2, 1], [1, 2]]))
    assert np.array_equal(pair.avec, [0, 0]) and pair.grad_norm == 0


# -- properties --------------------------------------------------------------

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def jets(draw, n=None):
    n = draw(st.integers(2, 6)) if n is None else n
    A = draw(arrays(float, (n, n), elements=finite))
    g = draw(arrays(float, (n,), elements=finite))
    return jet(g, A + A.T)


def _rotation(n, seed):
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(n, n)))
    return q * np.sign(np.diag(r))


@given(jets())
def test_inequality_holds(j):
    lhs, rhs = fundamental_residual(j)
    scale = tolerance_scale(j)
    assert rhs >= -1e-9 * scale
    assert lhs <= rhs + 1e-9 * scale


@given(jets(n=2))
def test_planar_identity(j):
    lhs, rhs = fundamental_residual(j)
    assert rhs == pytest.approx(0, abs=1e-12 * tolerance_scale(j))
    assert lhs <= 1e-12 * tolerance_scale(j)


@given(jets(), st.integers(0, 2**32 - 1))
def test_orthogonal_invariance(j, seed):
    Q = _rotation(j.n, seed)
    rotated = jet(Q @ j.grad, Q @ j.hess @ Q.T)
    a, b = fundamental_residual(j), fundamental_residual(rotated)
    tol = 1e-9 * tolerance_scale(j)
    assert a[0] == pytest.approx(b[0], abs=tol) and a[1] == pytest.approx(b[1], abs=tol)


@given(jets(), st.floats(0.1, 10), st.floats(0.1, 10))
def test_scaling_covariance(j, s, t):
    scaled = jet(t * j.grad, s * j.hess)
    a, b = fundamental_residual(j), fundamental_residual(scaled)
    f = (s * t) ** 2
    tol = 1e-9 * tolerance_scale(scaled)
    assert b[0] == pytest.approx(f * a[0], abs=tol) and b[1] == pytest.approx(f * a[1], abs=tol)


@given(jets())
def test_eigen_form_agrees(j):
    g2 = float(j.grad @ j.grad)
    if g2 < 1e-6:
        return
    pair = eigendecompose(j)
    assert np.sum(pair.avec ** 2) == pytest.approx(1, abs=1e-12)
    assert pair.lambdas.sum() == pytest.approx(np.trace(j.hess), abs=1e-9 * max(1, np.abs(j.hess).max()))
    assert np.all(np.diff(pair.lambdas) <= 0)
    lhs_e, rhs_e = eigen_reduced_residual(pair)
    lhs, rhs = fundamental_residual(j)
    tol = 1e-9 * tolerance_scale(j)
    assert g2 * lhs_e == pytest.approx(lhs, abs=tol) and g2 * rhs_e == pytest.approx(rhs, abs=tol)


@given(jets())
def test_reconstruction(j):
    pair = eigendecompose(j)
    lam, Q = np.linalg.eigh(j.hess)
    assert np.allclose(np.sort(pair.lambdas), lam, atol=1e-10 * max(1, np.abs(lam).max()))


# -- batch path --------------------------------------------------------------

def test_batch_matches_pointwise():
    H, G = random_jets(4, 50, seed=1)
    lhs, rhs, scale = batch_residuals(H, G)
    for k in range(50):
        j = jet(G[k], H[k])
        a, b = fundamental_residual(j)
        assert lhs[k] == pytest.approx(a, abs=1e-9 * scale[k])
        assert rhs[k] == pytest.approx(b, abs=1e-9 * scale[k])
        assert scale[k] == pytest.approx(tolerance_scale(j))


def test_random_jets_symmetric_and_seeded():
    H, G = random_jets(3, 10, seed=5)
    assert np.array_equal(H, np.swapaxes(H, 1, 2))
    H2, G2 = random_jets(3, 10, seed=5)
    assert np.array_equal(H, H2) and np.array_equal(G, G2)
    assert np.abs(H).max() <= 10 and np.abs(G).max() <= 10


@pytest.mark.parametrize("n", [2, 3, 6])
def test_check_inequality_small(n):
    res = check_inequality(n, 20_000, seed=11, chunk=7_000)
    assert res.violations == 0 and res.samples == 20_000
    if n == 2:
        assert res.max_planar <= 1e-12


def test_check_inequality_chunking_deterministic():
    a = check_inequality(3, 10_000, seed=2, chunk=3_000)
    b = check_inequality(3, 10_000, seed=2, chunk=3_000)
    assert a == b
