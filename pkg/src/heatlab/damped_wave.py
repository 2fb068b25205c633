"""Structurally damped wave equation as a first-order block system.

With ``D`` the Dirichlet Laplacian ``-d^2/dx^2`` on an interval (positive
definite) the generator is ``[[0, D], [-D, -rho D]]``. Both blocks are
functions of ``D``, so the system splits into 2x2 problems, one per
eigenmode:

    M(lam) = [[0, lam], [-lam, -rho lam]].

The kernel lives on two disjoint copies of the interval; points in different
copies are at distance ``+inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DomainError, FitError, ValidationError
from .graph_ops import discretize_graph, interval
from .kernel_engine import KernelMatrix, SpectralData, compute_spectrum
from .regcheck import BlowupFit, Prediction, ScanPoint, HoelderReport, PASS, FAIL, INCONCLUSIVE
from .space import SampledSpace, count_infinite_pairs, disjoint_union, estimate_exponent_from_pairs, _valid_pairs

U_SIGN = np.array([1.0, -1.0])


def mode_matrix(lam: float, rho: float) -> np.ndarray:
    return np.array([[0.0, lam], [-lam, -rho * lam]])


def _sinhc(z: float, t: float) -> float:
    """``sinh(sqrt(z) t) / sqrt(z)`` for real ``z`` of either sign, smooth through 0."""
    x = z * t * t
    if abs(x) < 1e-3:
        # series in x: t (1 + x/6 + x^2/120 + x^3/5040)
        return t * (1 + x / 6 + x * x / 120 + x**3 / 5040)
    if z > 0:
        r = math.sqrt(z)
        return math.sinh(r * t) / r
    r = math.sqrt(-z)
    return math.sin(r * t) / r


def _cosh(z: float, t: float) -> float:
    x = z * t * t
    if abs(x) < 1e-3:
        return 1 + x / 2 + x * x / 24 + x**3 / 720
    if z > 0:
        return math.cosh(math.sqrt(z) * t)
    return math.cos(math.sqrt(-z) * t)


def mode_exponential(m, t: float) -> np.ndarray:
    """``exp(t m)`` for a real 2x2 matrix in closed form.

    Uses ``exp(tm) = e^{ct} [cosh(dt) I + sinh(dt)/d (m - cI)]`` with
    ``c = tr/2`` and ``d^2 = c^2 - det``. Complex ``d`` becomes the
    trigonometric branch and ``d = 0`` (the defective case) the series limit,
    which is the Jordan-block formula.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValidationError("mode matrix must be 2x2")
    if t < 0:
        raise DomainError("t must be non-negative")
    if t == 0:
        return np.eye(2)
    c = 0.5 * (m[0, 0] + m[1, 1])
    z = c * c - (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    n = m - c * np.eye(2)
    if z > 0 and z * t * t >= 1e-3:
        # split the growth factors to keep e^{ct} cosh(dt) from overflowing
        r = math.sqrt(z)
        ep, em = math.exp((c + r) * t), math.exp((c - r) * t)
        return 0.5 * (ep + em) * np.eye(2) + 0.5 * (ep - em) / r * n
    e = math.exp(c * t)
    return e * (_cosh(z, t) * np.eye(2) + _sinhc(z, t) * n)


@dataclass
class BlockModeSystem:
    base_spec: SpectralData
    rho: float
    space: SampledSpace  # the base interval
    per_mode: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.rho > 0:
            raise ValidationError("damping coefficient must be positive")
        if np.any(self.base_spec.eigenvalues <= 0):
            raise ValidationError("base operator must be positive definite (Dirichlet)")
        if not self.per_mode:
            self.per_mode = [mode_matrix(float(lam), self.rho) for lam in self.base_spec.eigenvalues]

    @property
    def n(self) -> int:
        return self.base_spec.size

    @property
    def union(self) -> SampledSpace:
        return disjoint_union(self.space, self.space)

    def block_generator(self) -> np.ndarray:
        """Dense ``2n x 2n`` generator ``[[0, D], [-D, -rho D]]`` with ``D = W^{-1} K``."""
        phi = self.base_spec.eigenvectors
        w = self.base_spec.weights
        d = (phi * self.base_spec.eigenvalues) @ (phi.T * w[None, :])
        z = np.zeros_like(d)
        return np.block([[z, d], [-d, -self.rho * d]])


def interval_system(n_points: int, rho: float = 1.0, length: float = 1.0) -> BlockModeSystem:
    """Wave system on ``[0, length]`` with ``n_points`` interior nodes."""
    op, sp = discretize_graph(interval(length), length / (n_points + 1))
    return BlockModeSystem(compute_spectrum(op), rho, sp)


def wave_kernel(sys: BlockModeSystem, t: float) -> KernelMatrix:
    """Block kernel ``sum_n exp(t M_n) phi_n(x) phi_n(y)`` on the doubled space.

    ``values[a*n + i, b*n + j]`` is component ``(a, b)`` of ``p_t(x_i, x_j)``,
    so ``values[n:, :n]`` holds ``p^(21)`` and ``values[n:, n:]`` holds ``p^(22)``.
    """
    if not t > 0:
        raise DomainError(f"kernel time must be positive, got {t}")
    phi = sys.base_spec.eigenvectors
    e = np.array([mode_exponential(m, t) for m in sys.per_mode])
    blocks = [[(phi * e[:, a, b]) @ phi.T for b in range(2)] for a in range(2)]
    vals = np.block(blocks)
    return KernelMatrix(t, vals, sys.union, 1, np.concatenate([sys.space.weights] * 2), None, False, len(sys.per_mode))


def component(k: KernelMatrix, a: int, b: int) -> np.ndarray:
    """Component ``p^(ab)`` (1-based indices) of a block kernel."""
    n = k.values.shape[0] // 2
    return k.values[(a - 1) * n : a * n, (b - 1) * n : b * n]


def block_symmetry_residual(k: KernelMatrix) -> float:
    """``max |p_t(y,x) - U p_t(x,y)^T U|`` with ``U = diag(I, -I)``, relative to max entry."""
    v = k.values
    n = v.shape[0] // 2
    u = np.repeat(U_SIGN, n)
    other = u[:, None] * v.T * u[None, :]
    return float(np.abs(v - other).max() / np.abs(v).max())


def apply_block_generator_y(sys: BlockModeSystem, k: KernelMatrix) -> np.ndarray:
    """``A_y`` applied to every row ``p_t(x, .)`` of the block kernel, computed per mode."""
    phi = sys.base_spec.eigenvectors
    e = np.array([m @ mode_exponential(m, k.t) for m in sys.per_mode])
    return np.block([[(phi * e[:, a, b]) @ phi.T for b in range(2)] for a in range(2)])


def wave_constants(sys: BlockModeSystem, t: float, cutoff: float | None = None) -> tuple[float, float, int, Any]:
    """``C(t) = sup ||A p_t(x,.) - A p_t(x',.)||_{L2} / d(x,x')`` over finite-distance pairs.

    Returns ``(C, sup pointwise seminorm, excluded infinite pairs, exponent estimate)``.
    """
    k = wave_kernel(sys, t)
    ap = apply_block_generator_y(sys, k)
    w = k.weights
    dist_rows = cdist(ap, ap, "minkowski", p=2, w=w)
    s = k.space
    mask, _ = _valid_pairs(s.dist)
    d = s.dist[mask]
    c = float((dist_rows[mask] / d).max())
    sup = cdist(k.values, k.values, "chebyshev")
    semi = float((sup[mask] / d).max())
    est = estimate_exponent_from_pairs(s, dist_rows, cutoff, 1.0)
    return c, semi, count_infinite_pairs(s.dist), est


def fit_wave_bound(t_grid, constants) -> BlowupFit:
    """Least squares ``C(t) = C1/t + C2/t^2``; ``p`` is the small-t log-log slope."""
    t = np.asarray(t_grid, dtype=float)
    c = np.asarray(constants, dtype=float)
    basis = np.column_stack([1 / t, 1 / t**2])
    if np.linalg.matrix_rank(basis) < 2:
        raise FitError("wave bound fit is degenerate (need two distinct times)")
    coef, *_ = np.linalg.lstsq(basis, c, rcond=None)
    resid = float(np.linalg.norm(basis @ coef - c) / np.linalg.norm(c))
    half = max(2, (t.size + 1) // 2)
    small = np.argsort(t)[:half]
    slope = -float(np.polyfit(np.log(t[small]), np.log(c[small]), 1)[0])
    return BlowupFit(float(coef[0]), float(coef[1]), slope, resid, slope)


def wave_bound_scan(sys: BlockModeSystem, t_grid, cutoff: float | None = None, power: float = 2.0) -> HoelderReport:
    t_grid = [float(x) for x in t_grid]
    if len(t_grid) < 6 or min(t_grid) <= 0 or math.log10(max(t_grid) / min(t_grid)) < 2 - 1e-9:
        raise ValidationError("wave time grid needs at least 6 positive points over two decades")
    t_grid = sorted(t_grid)
    points = []
    excluded = 0
    for t in t_grid:
        c, semi, excluded, est = wave_constants(sys, t, cutoff)
        points.append(ScanPoint(t, c, semi, est.fitted_exponent, est.fit_stderr))
    reasons = []
    try:
        fit = fit_wave_bound(t_grid, [p.C for p in points])
    except FitError as exc:
        fit = None
        reasons.append(str(exc))
    if fit is None:
        verdict = INCONCLUSIVE
    elif fit.p <= power + 0.2:
        verdict = PASS
    else:
        verdict = FAIL
        reasons.append(f"small-t slope {fit.p:.4f} above {power} + 0.2")
    pred = Prediction(1.0, power, "damped-wave smoothing bound C1/t + C2/t^2")
    extra = {"rho": sys.rho, "excluded_infinite_pairs": excluded}
    return HoelderReport("damped-wave", pred, points, fit, verdict, reasons, extra)
