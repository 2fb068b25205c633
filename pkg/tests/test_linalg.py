from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from heatlab.errors import CapacityError, DimensionError, SingularMatrixError, SymmetryError
from heatlab.linalg import (
    MAX_SIZE,
    complex_eigenvectors,
    expm_oracle,
    hermitian_embed,
    hermitian_embed_eigen,
    pinv_apply,
    solve_spd,
    symmetric_eigen,
    weighted_eigen,
)


def _adjugate_inverse(m):
    n = m.shape[0]
    cof = np.zeros_like(m)
    for i, j in itertools.product(range(n), repeat=2):
        minor = np.delete(np.delete(m, i, 0), j, 1)
        cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return cof.T / np.linalg.det(m)


def test_identity_and_diagonal():
    d = symmetric_eigen(np.eye(3))
    assert np.allclose(d.eigenvalues, 1)
    assert np.allclose(d.eigenvectors.T @ d.eigenvectors, np.eye(3), atol=1e-12)
    d = symmetric_eigen(np.diag([2.0, -1.0, 5.0]))
    assert np.allclose(d.eigenvalues, [-1, 2, 5])


def test_swap_matrix():
    d = symmetric_eigen([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(d.eigenvalues, [-1, 1])
    v = d.eigenvectors
    assert abs(abs(v[0, 0]) - 1 / math.sqrt(2)) < 1e-12
    assert np.isclose(v[0, 0], -v[1, 0])
    assert np.isclose(v[0, 1], v[1, 1])


def test_eigen_errors():
    with pytest.raises(DimensionError):
        symmetric_eigen(np.zeros((2, 3)))
    with pytest.raises(SymmetryError):
        symmetric_eigen([[1.0, 2.0], [0.0, 1.0]])


def test_capacity_error():
    with pytest.raises(CapacityError):
        symmetric_eigen(np.eye(MAX_SIZE + 1))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)))
def test_eigen_reconstruction(a):
    m = a + a.T
    d = symmetric_eigen(m)
    v = d.eigenvectors
    scale = max(np.abs(m).max(), 1e-300)
    assert np.abs(v @ np.diag(d.eigenvalues) @ v.T - m).max() <= 1e-9 * scale + 1e-300
    assert np.abs(v.T @ v - np.eye(6)).max() <= 1e-10
    assert np.all(np.diff(d.eigenvalues) >= 0)


def test_eigen_deterministic():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(40, 40))
    m = a + a.T
    d1, d2 = symmetric_eigen(m), symmetric_eigen(m)
    assert np.array_equal(d1.eigenvalues, d2.eigenvalues)
    assert np.array_equal(d1.eigenvectors, d2.eigenvectors)


def test_weighted_orthonormal():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(8, 8))
    k = a @ a.T
    w = rng.uniform(0.5, 2.0, 8)
    d = weighted_eigen(k, w)
    v = d.eigenvectors
    assert np.abs(v.T @ (w[:, None] * v) - np.eye(8)).max() < 1e-10
    assert np.abs(k @ v - (w[:, None] * v) * d.eigenvalues).max() < 1e-9 * np.abs(k).max()


def test_hermitian_real_case_duplicates():
    re = np.array([[2.0, 1.0], [1.0, 3.0]])
    d = hermitian_embed_eigen(re, np.zeros((2, 2)))
    base = symmetric_eigen(re).eigenvalues
    assert np.allclose(d.eigenvalues, np.repeat(base, 2))


def test_hermitian_pauli():
    d = hermitian_embed_eigen(np.zeros((2, 2)), [[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(d.eigenvalues, [-1, -1, 1, 1])


def test_hermitian_structure_error():
    with pytest.raises(SymmetryError):
        hermitian_embed(np.eye(2), np.eye(2))


def _charpoly_roots(h):
    """Roots of det(h - x I) by bracketing sign changes on a fine grid (brute force)."""
    n = h.shape[0]
    bound = np.abs(h).sum(axis=1).max() + 1
    f = lambda x: np.linalg.det(h - x * np.eye(n)).real
    xs = np.linspace(-bound, bound, 20001)
    vals = np.array([f(x) for x in xs])
    roots = [brentq(f, xs[i], xs[i + 1], xtol=1e-14) for i in range(len(xs) - 1) if vals[i] * vals[i + 1] < 0]
    return np.array(roots)


def test_hermitian_random_against_charpoly():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = a + a.conj().T
    d = hermitian_embed_eigen(h.real, h.imag)
    lam, vecs = complex_eigenvectors(d)
    roots = _charpoly_roots(h)
    assert roots.size == 4
    assert np.abs(lam - roots).max() < 1e-9
    assert np.abs(h @ vecs - vecs * lam).max() < 1e-9
    assert np.abs(vecs.conj().T @ vecs - np.eye(4)).max() < 1e-9


def test_hermitian_embedding_spectrum_matches():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    h = a + a.conj().T
    d = hermitian_embed_eigen(h.real, h.imag)
    ref = symmetric_eigen(hermitian_embed(h.real, h.imag))
    assert np.array_equal(d.eigenvalues, ref.eigenvalues)


def test_expm_examples():
    assert np.array_equal(expm_oracle(np.zeros((3, 3))), np.eye(3))
    assert np.isclose(expm_oracle([[-1.0]])[0, 0], math.exp(-1), rtol=1e-14)
    assert np.allclose(expm_oracle([[0.0, 1.0], [0.0, 0.0]], 2.0), [[1, 2], [0, 1]], atol=1e-15)


def test_expm_against_eigen():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(6, 6))
    m = a + a.T
    m *= 10 / np.abs(np.linalg.eigvalsh(m)).max()
    d = symmetric_eigen(m)
    exact = d.eigenvectors @ np.diag(np.exp(d.eigenvalues)) @ d.eigenvectors.T
    assert np.abs(expm_oracle(m) - exact).max() <= 1e-11 * np.abs(exact).max()


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-2, 2)), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_expm_semigroup(m, s, t):
    lhs = expm_oracle(m, s + t)
    rhs = expm_oracle(m, s) @ expm_oracle(m, t)
    assert np.abs(lhs - rhs).max() <= 1e-9 * max(1.0, np.abs(lhs).max())


def test_solve_spd_examples():
    assert np.allclose(solve_spd(np.eye(3), [1.0, 0, 0]), [1, 0, 0])
    assert np.allclose(solve_spd([[4.0]], [8.0]), [2.0])


def test_solve_spd_tridiagonal_adjugate():
    m = 2 * np.eye(5) - np.eye(5, k=1) - np.eye(5, k=-1)
    rhs = np.ones(5)
    x = solve_spd(m, rhs)
    assert np.abs(x - _adjugate_inverse(m) @ rhs).max() < 1e-12
    assert np.linalg.norm(m @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_solve_spd_singular_reports_pivot():
    m = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(SingularMatrixError) as exc:
        solve_spd(m, np.ones(3))
    assert exc.value.pivot == 1


def test_pinv_apply_laplacian():
    lap = np.array([[1.0, -1.0], [-1.0, 1.0]])
    x = pinv_apply(lap, np.array([1.0, -1.0]))
    assert np.allclose(x, [0.5, -0.5])
