"""Dense linear algebra used throughout heatlab.

Everything here works on plain ``numpy`` float arrays. The symmetric
eigensolver is a cyclic Jacobi method compiled with numba; sweeps visit the
upper triangle in row-major order, so results are bit-reproducible for a given
input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (
    CapacityError,
    ConvergenceError,
    DimensionError,
    SingularMatrixError,
    SymmetryError,
)

MAX_SIZE = 4096


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues with eigenvectors stored as columns.

    ``weights`` is ``None`` for the Euclidean inner product; otherwise the
    columns satisfy ``V.T @ diag(weights) @ V = I``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: np.ndarray | None = None
    sweeps: int = 0


def as_dense(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {a.shape}")
    if max(a.shape) > MAX_SIZE:
        raise CapacityError(f"{name} of shape {a.shape} exceeds the {MAX_SIZE} size cap")
    if not np.all(np.isfinite(a)):
        raise DimensionError(f"{name} has non-finite entries")
    return a


def _require_square(a: np.ndarray, name: str) -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")


def _require_symmetric(a: np.ndarray, name: str, rtol: float = 1e-12) -> None:
    scale = np.abs(a).max() if a.size else 0.0
    if scale and np.abs(a - a.T).max() > rtol * scale:
        raise SymmetryError(f"{name} is not symmetric to {rtol:g} relative")


@njit(cache=True)
def _jacobi(a, vt, tol_abs, max_sweeps):
    # a is overwritten with the (nearly) diagonal matrix, vt accumulates the
    # transposed rotations so that updates run over contiguous rows.
    n = a.shape[0]
    off = 0.0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        off = math.sqrt(2.0 * off)
        if off <= tol_abs:
            return sweep, off
        # skip small entries during the first sweeps (threshold Jacobi)
        thresh = 0.0
        if sweep < 3:
            thresh = 0.2 * off / (math.sqrt(2.0) * n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                g = 100.0 * abs(apq)
                if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                if abs(apq) < thresh:
                    continue
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = c * x - s * y
                    a[q, k] = s * x + c * y
                for k in range(n):
                    a[k, p] = a[p, k]
                    a[k, q] = a[q, k]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    x = vt[p, k]
                    y = vt[q, k]
                    vt[p, k] = c * x - s * y
                    vt[q, k] = s * x + c * y
    return max_sweeps, off


def _fix_signs(v: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def symmetric_eigen(m, tol: float = 1e-12, max_sweeps: int = 100) -> EigenDecomposition:
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Converged when the off-diagonal Frobenius norm drops to ``tol * ||m||_F``.
    Raises :class:`ConvergenceError` (carrying the achieved off-diagonal norm)
    if ``max_sweeps`` is exhausted first.
    """
    a = as_dense(m)
    _require_square(a, "matrix")
    _require_symmetric(a, "matrix")
    n = a.shape[0]
    if n == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    fro = float(np.linalg.norm(a))
    work = np.ascontiguousarray(0.5 * (a + a.T))
    vt = np.eye(n)
    if fro == 0.0:
        return EigenDecomposition(np.zeros(n), vt)
    sweeps, off = _jacobi(work, vt, tol * fro, max_sweeps)
    if off > tol * fro:
        raise ConvergenceError(
            f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal norm {off:.3e})",
            achieved=off,
        )
    lam = np.diag(work).copy()
    order = np.argsort(lam, kind="stable")
    vecs = _fix_signs(vt.T[:, order])
    return EigenDecomposition(lam[order], np.ascontiguousarray(vecs), sweeps=int(sweeps))


def weighted_eigen(stiffness, weights, tol: float = 1e-12) -> EigenDecomposition:
    """Solve ``K phi = lam W phi`` for diagonal positive ``W``.

    Eigenvectors come back orthonormal in the ``W``-weighted inner product.
    """
    k = as_dense(stiffness, "stiffness")
    w = np.asarray(weights, dtype=float)
    if w.shape != (k.shape[0],):
        raise DimensionError("weights must match the stiffness size")
    if np.any(w <= 0):
        raise DimensionError("weights must be strictly positive")
    s = 1.0 / np.sqrt(w)
    dec = symmetric_eigen(s[:, None] * k * s[None, :], tol=tol)
    return EigenDecomposition(dec.eigenvalues, s[:, None] * dec.eigenvectors, w, dec.sweeps)


def hermitian_embed(re, im) -> np.ndarray:
    """Real symmetric ``2n x 2n`` embedding ``[[re, -im], [im, re]]`` of ``re + i im``."""
    r = as_dense(re, "real part")
    i = as_dense(im, "imaginary part")
    if r.shape != i.shape:
        raise DimensionError("real and imaginary parts must have the same shape")
    _require_square(r, "real part")
    scale = max(np.abs(r).max(initial=0.0), np.abs(i).max(initial=0.0))
    if scale and np.abs(r - r.T).max() > 1e-12 * scale:
        raise SymmetryError("real part of a Hermitian matrix must be symmetric")
    if scale and np.abs(i + i.T).max() > 1e-12 * scale:
        raise SymmetryError("imaginary part of a Hermitian matrix must be antisymmetric")
    return np.block([[r, -i], [i, r]])


def hermitian_embed_eigen(re, im, tol: float = 1e-12) -> EigenDecomposition:
    """Eigen-decomposition of the real embedding of a Hermitian matrix.

    Every eigenvalue of ``re + i im`` appears twice. Use
    :func:`complex_eigenvectors` to recover one complex vector per eigenvalue.
    """
    return symmetric_eigen(hermitian_embed(re, im), tol=tol)


def complex_eigenvectors(dec: EigenDecomposition, rtol: float = 1e-8):
    """Collapse a doubled embedding spectrum into complex eigenpairs.

    Columns ``(a, b)`` of the embedding map to ``a + i b``; inside each cluster
    of (numerically) equal eigenvalues the complex span is re-orthonormalised.
    Returns ``(eigenvalues, vectors)`` with ``n`` entries each.
    """
    lam = dec.eigenvalues
    vecs = dec.eigenvectors
    n2 = lam.size
    if n2 % 2:
        raise DimensionError("embedding spectrum must have even size")
    n = n2 // 2
    z_all = vecs[:n, :] + 1j * vecs[n:, :]
    scale = max(np.abs(lam).max(initial=0.0), 1.0)
    out_lam: list[float] = []
    out_vec: list[np.ndarray] = []
    start = 0
    while start < n2:
        stop = start + 1
        while stop < n2 and lam[stop] - lam[stop - 1] <= rtol * scale:
            stop += 1
        block = z_all[:, start:stop]
        k = (stop - start) // 2
        if k == 0:
            raise DimensionError("embedding spectrum is not paired; check Hermitian structure")
        u, sv, _ = np.linalg.svd(block, full_matrices=False)
        for j in range(k):
            out_lam.append(float(np.mean(lam[start:stop])))
            out_vec.append(u[:, j])
        start = stop
    if len(out_lam) != n:
        raise DimensionError("could not pair the embedding spectrum")
    return np.array(out_lam), np.column_stack(out_vec)


def expm_oracle(m, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(t m)`` by scaling and squaring a Taylor series.

    Kept deliberately independent of the spectral machinery: it is the
    reference the kernel and damped-wave code are validated against.
    """
    a = as_dense(m) * float(t)
    _require_square(a, "matrix")
    n = a.shape[0]
    norm1 = np.abs(a).sum(axis=0).max(initial=0.0)
    squarings = 0
    if norm1 > 0.5:
        squarings = int(math.ceil(math.log2(norm1 / 0.5)))
    b = a / 2.0**squarings
    term = np.eye(n)
    acc = np.eye(n)
    for k in range(1, 60):
        term = term @ b / k
        acc = acc + term
        if np.abs(term).max(initial=0.0) <= 1e-18 * np.abs(acc).max(initial=1.0):
            break
    for _ in range(squarings):
        acc = acc @ acc
    return acc


def cholesky(m) -> np.ndarray:
    """Lower Cholesky factor; raises :class:`SingularMatrixError` at the first bad pivot."""
    a = as_dense(m)
    _require_square(a, "matrix")
    _require_symmetric(a, "matrix", rtol=1e-10)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        row = low[j, :j]
        d = a[j, j] - row @ row
        if not d > 1e-14 * abs(a[j, j]) or d <= 0.0:
            raise SingularMatrixError(f"non-positive pivot {d:.3e} at index {j}", pivot=j)
        low[j, j] = math.sqrt(d)
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ row) / low[j, j]
    return low


def _cho_solve(low: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = low.shape[0]
    y = np.zeros_like(rhs)
    for i in range(n):
        y[i] = (rhs[i] - low[i, :i] @ y[:i]) / low[i, i]
    x = np.zeros_like(rhs)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - low[i + 1 :, i] @ x[i + 1 :]) / low[i, i]
    return x


def solve_spd(m, rhs) -> np.ndarray:
    """Solve ``m x = rhs`` for symmetric positive-definite ``m``.

    ``rhs`` may be a vector or a matrix of right-hand sides. One step of
    iterative refinement is applied.
    """
    a = as_dense(m)
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"rhs length {b.shape[0]} does not match matrix size {a.shape[0]}")
    low = cholesky(a)
    x = _cho_solve(low, b)
    x = x + _cho_solve(low, b - a @ x)
    return x


def pinv_apply(m, rhs, rtol: float = 1e-10) -> np.ndarray:
    """Apply the Moore-Penrose pseudoinverse of a symmetric matrix to ``rhs``."""
    dec = symmetric_eigen(m)
    lam = dec.eigenvalues
    cut = rtol * max(np.abs(lam).max(initial=0.0), 1e-300)
    inv = np.where(np.abs(lam) > cut, 1.0 / np.where(lam == 0, 1.0, lam), 0.0)
    v = dec.eigenvectors
    b = np.asarray(rhs, dtype=float)
    coeff = v.T @ b
    coeff = coeff * (inv if b.ndim == 1 else inv[:, None])
    return v @ coeff
