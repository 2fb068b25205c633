"""Heat kernels from spectral data and numerical checks of the kernel axioms.

With ``K phi_n = lam_n W phi_n`` and ``Phi^T W Phi = I`` the discrete kernel is

    p_t = Phi exp(-Lam t) Phi^T = exp(tA) W^{-1},    A = -W^{-1} K,

so that ``(exp(tA) f)_i = sum_j p_t[i, j] w_j f_j`` and the composition law
reads ``p_{t+s} = p_t W p_s``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, DimensionError, DomainError, HeatlabError
from .graph_ops import OperatorDiscretization
from .linalg import complex_eigenvectors, hermitian_embed_eigen, weighted_eigen
from .space import NormSpec, SampledSpace, norm_distance

log = logging.getLogger(__name__)

T_MIN = 1e-6
TRUNCATION = 1e-14


class StateError(HeatlabError):
    """Kernel requested without spectral data."""


@dataclass(frozen=True)
class SpectralData:
    """Eigenpairs of ``K phi = lam W phi``; vectors may be complex (magnetic case)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size

    def sup_norms(self) -> np.ndarray:
        return np.abs(self.eigenvectors).max(axis=0)


def compute_spectrum(d: OperatorDiscretization) -> SpectralData:
    w = d.mass_weights
    if d.stiffness_imag is None:
        dec = weighted_eigen(d.stiffness, w)
        return SpectralData(dec.eigenvalues, dec.eigenvectors, w)
    s = 1.0 / np.sqrt(w)
    scale = s[:, None] * s[None, :]
    dec = hermitian_embed_eigen(d.stiffness * scale, d.stiffness_imag * scale)
    lam, z = complex_eigenvectors(dec)
    return SpectralData(lam, s[:, None] * z, w)


@dataclass
class KernelMatrix:
    t: float
    values: np.ndarray
    space: SampledSpace | None = None
    block_size: int = 1
    weights: np.ndarray | None = None
    spectral: SpectralData | None = None
    self_adjoint: bool = True
    n_modes: int = 0

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise DomainError("kernel has non-finite entries")
        if self.weights is None and self.space is not None:
            self.weights = self.space.weights

    @property
    def middle(self) -> np.ndarray:
        """Quadrature weights of the composition ``k1 W k2`` (repeated per block component)."""
        return np.repeat(self.weights, self.block_size) if self.block_size > 1 else self.weights

    def to_csv(self, path: str | Path | None = None) -> str:
        """Rows ``i,j,x_dist,value`` (block kernels: ``value_11 .. value_22``)."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        n = self.values.shape[0] // self.block_size
        dist = self.space.dist if self.space is not None else None
        if self.block_size == 1:
            wr.writerow(["i", "j", "x_dist", "value"])
        else:
            wr.writerow(["i", "j", "x_dist", "value_11", "value_12", "value_21", "value_22"])
        for i in range(n):
            for j in range(n):
                dx = "" if dist is None else _fmt(dist[i, j])
                if self.block_size == 1:
                    wr.writerow([i, j, dx, _fmt(self.values[i, j])])
                else:
                    b = block_of(self.values, i, j)
                    wr.writerow([i, j, dx, *(_fmt(v) for v in b.ravel())])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _fmt(v) -> str:
    v = complex(v) if np.iscomplexobj(v) else float(v)
    if isinstance(v, complex):
        return repr(v)
    return "inf" if math.isinf(v) else repr(v)


def block_of(values: np.ndarray, i: int, j: int) -> np.ndarray:
    """2x2 block ``p(x_i, x_j)`` from a kernel stored with copies side by side.

    Rows/columns ``0..n-1`` are the first copy, ``n..2n-1`` the second.
    """
    n = values.shape[0] // 2
    return values[np.ix_([i, n + i], [j, n + j])]


def heat_kernel(
    spec: SpectralData | None,
    weights=None,
    t: float = 1.0,
    n_modes: int | None = None,
    space: SampledSpace | None = None,
    self_adjoint: bool = True,
) -> KernelMatrix:
    if spec is None:
        raise StateError("no spectral data supplied")
    if not t > 0:
        raise DomainError(f"kernel time must be positive, got {t}")
    if t < T_MIN:
        raise DomainError(f"t={t} is below the smallest supported time {T_MIN}")
    if t < 1e-3:
        log.warning("t=%g: truncation error grows as t -> 0", t)
    w = spec.weights if weights is None else np.asarray(weights, dtype=float)
    if w.shape != spec.weights.shape or not np.allclose(w, spec.weights, rtol=0, atol=0):
        raise DimensionError("weights differ from those of the spectral data")
    decay = np.exp(-spec.eigenvalues * t)
    keep = decay * spec.sup_norms() ** 2 >= TRUNCATION
    if n_modes is not None:
        keep &= np.arange(keep.size) < n_modes
    phi = spec.eigenvectors[:, keep]
    vals = (phi * decay[keep]) @ phi.conj().T
    if not np.iscomplexobj(vals) or np.abs(vals.imag).max(initial=0.0) == 0:
        vals = vals.real
    return KernelMatrix(t, vals, space, 1, w, spec, self_adjoint, int(keep.sum()))


def truncation_bound(spec: SpectralData, t: float, n_modes: int) -> float:
    """Max-entry bound on the modes dropped beyond the first ``n_modes``."""
    decay = np.exp(-spec.eigenvalues[n_modes:] * t)
    return float((decay * spec.sup_norms()[n_modes:] ** 2).sum())


def identity_surrogate(k: KernelMatrix) -> KernelMatrix:
    """``W^{-1}``: the kernel of the identity map at ``t = 0``."""
    return KernelMatrix(0.0, np.diag(1.0 / k.middle), k.space, k.block_size, k.weights, None, k.self_adjoint)


def _check_same(*ks: KernelMatrix) -> None:
    ref = ks[0]
    for k in ks[1:]:
        if k.values.shape != ref.values.shape or k.block_size != ref.block_size:
            raise DimensionError("kernels live on different spaces")
        if not np.array_equal(k.weights, ref.weights):
            raise DimensionError("kernels use different quadrature weights")


def chapman_kolmogorov_residual(k1: KernelMatrix, k2: KernelMatrix, k3: KernelMatrix) -> float:
    """``max |k3 - k1 W k2| / max |k3|``."""
    _check_same(k1, k2, k3)
    comp = (k1.values * k1.middle[None, :]) @ k2.values
    return float(np.abs(k3.values - comp).max() / np.abs(k3.values).max())


def symmetry_residual(k: KernelMatrix) -> float:
    if not k.self_adjoint:
        raise ContractError("kernel symmetry is only asserted for self-adjoint generators")
    v = k.values
    return float(np.abs(v - v.conj().T).max() / np.abs(v).max())


def mass_residual(k: KernelMatrix) -> float:
    """``max_i |sum_j p_t(x_i, x_j) w_j - 1|``."""
    return float(np.abs(k.values @ k.weights - 1.0).max())


def _operator_weights(d: OperatorDiscretization, k: KernelMatrix) -> None:
    if d.size != k.values.shape[0]:
        raise DimensionError("operator and kernel sizes differ")


def apply_generator_x(k: KernelMatrix, d: OperatorDiscretization) -> np.ndarray:
    """``(A_x p_t)(x_i, x_j)``: the generator acting on each column."""
    _operator_weights(d, k)
    return -(d.hermitian @ k.values) / d.mass_weights[:, None]


def apply_generator_y(k: KernelMatrix, d: OperatorDiscretization) -> np.ndarray:
    """``(A_y p_t)(x_i, x_j)``: the generator acting on each row.

    For a self-adjoint generator this equals ``A_x p_t`` transposed back, and
    both equal ``d/dt p_t``.
    """
    _operator_weights(d, k)
    h = d.hermitian
    return -(k.values @ h.T) / d.mass_weights[None, :]


def spectral_generator_power(k: KernelMatrix, power: int) -> np.ndarray:
    """``Phi (-Lam)^power exp(-Lam t) Phi^*`` restricted to the modes kept in ``k``."""
    spec = k.spectral
    if spec is None:
        raise StateError("kernel carries no spectral data")
    decay = np.exp(-spec.eigenvalues * k.t)
    keep = decay * spec.sup_norms() ** 2 >= TRUNCATION
    keep &= np.arange(keep.size) < k.n_modes
    phi = spec.eigenvectors[:, keep]
    coef = (-spec.eigenvalues[keep]) ** power * decay[keep]
    out = (phi * coef) @ phi.conj().T
    return out.real if not np.iscomplexobj(out) or np.abs(out.imag).max(initial=0) == 0 else out


def time_derivative_deviation(spec: SpectralData, d: OperatorDiscretization, t: float, delta: float = 1e-4) -> float:
    """``max |(p_{t+delta} - p_{t-delta}) / (2 delta) - A_x p_t|``."""
    if delta >= t:
        raise DomainError("finite-difference step must be smaller than t")
    kp = heat_kernel(spec, t=t + delta)
    km = heat_kernel(spec, t=t - delta)
    k0 = heat_kernel(spec, t=t)
    fd = (kp.values - km.values) / (2 * delta)
    return float(np.abs(fd - apply_generator_x(k0, d)).max())


def coordinate_map_distance(k: KernelMatrix, spec: NormSpec, i: int, j: int, d: OperatorDiscretization | None = None) -> float:
    """Distance between the rows ``p_t(x_i, .)`` and ``p_t(x_j, .)``.

    The graph-norm variant adds the distance of the rows after applying the
    generator in the second coordinate.
    """
    if k.space is None:
        raise DimensionError("kernel has no sampled space attached")
    if i == j:
        return 0.0
    fi, fj = k.values[i], k.values[j]
    if spec.kind == "graph":
        op = d if d is not None else spec.operator
        ay = apply_generator_y(k, op)
        base = norm_distance(k.space, NormSpec("lr", spec.r), fi, fj)
        return base + norm_distance(k.space, NormSpec("lr", spec.r), ay[i], ay[j])
    return norm_distance(k.space, spec, fi, fj)
