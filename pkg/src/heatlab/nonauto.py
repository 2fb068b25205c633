"""Evolution families for time-dependent forms on a metric graph.

The form at time ``tau`` is ``sum_e c_e(tau) |f'|^2`` over the edges plus a
potential term ``V |f|^2``; after discretization this is the matrix
``K(tau) = sum_e c_e(tau) K_e + V W``. The propagator ``U(t, s)`` is built by
Crank-Nicolson steps with the form frozen at each step midpoint:

    (W + dt/2 K(mid)) u_next = (W - dt/2 K(mid)) u.

The kernel is ``p_{t,s} = U(t, s) W^{-1}``.

Coarse meshes are deliberate: the stiffest modes of a fine mesh are damped
by a factor close to -1 per step, which spoils second-order convergence at
moderate step counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DomainError, ValidationError
from .graph_ops import MetricGraph, OperatorDiscretization, discretize_graph
from .kernel_engine import KernelMatrix, compute_spectrum
from .linalg import cholesky, solve_spd
from .regcheck import CoordinateScan, _joint_estimate, coordinate_constant
from .space import HoelderEstimate, NormSpec, SampledSpace, _valid_pairs, estimate_exponent_from_pairs

PRESETS = ("constant", "sin_modulated", "tabulated")


@dataclass
class FormFamily:
    """Time-dependent diffusion coefficients per edge plus a constant potential.

    ``kind`` selects the coefficient law:

    * ``constant``: ``c_e = base``
    * ``sin_modulated``: ``c_e(tau) = base + amplitude * sin(frequency * tau)``
    * ``tabulated``: per-edge samples ``table_values[k, e]`` at ``table_times[k]``,
      linearly interpolated in time (held constant outside the table)

    ``eta`` is the ellipticity floor: any ``c_e(tau) < eta`` is rejected.
    """

    graph: MetricGraph
    h: float
    kind: str = "constant"
    base: float = 1.0
    amplitude: float = 0.0
    frequency: float = 1.0
    table_times: np.ndarray | None = None
    table_values: np.ndarray | None = None
    potential: float = 0.0
    eta: float = 1e-6
    op: OperatorDiscretization = field(init=False, repr=False)
    space: SampledSpace = field(init=False, repr=False)
    edge_stiffness: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in PRESETS:
            raise ValidationError(f"unknown coefficient preset {self.kind!r}; choose from {PRESETS}")
        if self.kind == "tabulated":
            if self.table_times is None or self.table_values is None:
                raise ValidationError("tabulated family needs table_times and table_values")
            self.table_times = np.asarray(self.table_times, dtype=float)
            vals = np.asarray(self.table_values, dtype=float)
            if vals.ndim == 1:
                vals = np.repeat(vals[:, None], len(self.graph.edges), axis=1)
            if vals.shape != (self.table_times.size, len(self.graph.edges)):
                raise ValidationError("table_values must have one row per time and one column per edge")
            if np.any(np.diff(self.table_times) <= 0):
                raise ValidationError("table_times must be strictly increasing")
            self.table_values = vals
        if any(e.q_samples is not None or e.b_samples is not None for e in self.graph.edges):
            raise ValidationError("form families carry their own potential; graph potentials are not supported")
        self.op, self.space = discretize_graph(self.graph, self.h)
        self.edge_stiffness = _edge_stiffness(self.graph, self.op)
        self.vertex_delta = np.zeros(self.op.size)
        for v, sigma in self.graph.delta.items():
            self.vertex_delta[self.op.mesh.reduced[self.op.mesh.vertex_node[v]]] += sigma

    @property
    def size(self) -> int:
        return self.op.size

    @property
    def weights(self) -> np.ndarray:
        return self.op.mass_weights

    def coefficients(self, tau: float) -> np.ndarray:
        ne = len(self.graph.edges)
        if self.kind == "constant":
            return np.full(ne, self.base)
        if self.kind == "sin_modulated":
            return np.full(ne, self.base + self.amplitude * math.sin(self.frequency * tau))
        return np.array([np.interp(tau, self.table_times, self.table_values[:, e]) for e in range(ne)])

    def stiffness(self, tau: float) -> np.ndarray:
        c = self.coefficients(tau)
        low = float(c.min())
        if not low >= self.eta:
            raise ValidationError(f"ellipticity fails at tau={tau:.6g}: coefficient {low:.6g} below {self.eta:g}")
        k = sum(ci * ke for ci, ke in zip(c, self.edge_stiffness))
        return k + np.diag(self.potential * self.weights + self.vertex_delta)

    def bounds(self, s: float, t: float, samples: int = 1001) -> tuple[float, float]:
        """Sampled (min, max) of the coefficients over ``[s, t]``: ellipticity and boundedness shadows."""
        taus = np.linspace(s, t, samples)
        c = np.array([self.coefficients(x) for x in taus])
        return float(c.min()), float(c.max())


def _edge_stiffness(g: MetricGraph, op: OperatorDiscretization) -> list[np.ndarray]:
    """Unit-coefficient stiffness contribution of each edge, on the retained nodes."""
    mesh = op.mesh
    n_full = mesh.reduced.size
    keep = mesh.kept
    out = []
    for k in range(len(g.edges)):
        nodes = mesh.edge_nodes[k]
        he = mesh.edge_spacing[k]
        a, b = nodes[:-1], nodes[1:]
        m = np.zeros((n_full, n_full))
        np.add.at(m, (a, a), 1.0 / he)
        np.add.at(m, (b, b), 1.0 / he)
        np.add.at(m, (a, b), -1.0 / he)
        np.add.at(m, (b, a), -1.0 / he)
        out.append(m[np.ix_(keep, keep)])
    return out


@dataclass
class Propagator:
    s: float
    t: float
    matrix: np.ndarray
    steps: int
    identity: bool = False

    def kernel(self, weights: np.ndarray) -> np.ndarray:
        return self.matrix / weights[None, :]


def propagate(fam: FormFamily, s: float, t: float, steps: int) -> Propagator:
    """Crank-Nicolson approximation of ``U(t, s)`` with ``steps`` uniform steps."""
    if t < s:
        raise DomainError(f"propagator needs s <= t, got s={s}, t={t}")
    if steps < 1:
        raise ValidationError("steps must be at least 1")
    n = fam.size
    if t == s:
        return Propagator(s, t, np.eye(n), 0, identity=True)
    w = fam.weights
    dt = (t - s) / steps
    u = np.eye(n)
    for k in range(steps):
        mid = s + (k + 0.5) * dt
        kk = fam.stiffness(mid)
        lhs = np.diag(w) + 0.5 * dt * kk
        rhs = np.diag(w) - 0.5 * dt * kk
        u = solve_spd(lhs, rhs @ u)
    return Propagator(s, t, u, steps)


def autonomous_reference(fam: FormFamily, tau: float) -> np.ndarray:
    """``exp(tau A)`` for the form frozen at time 0, from its spectrum."""
    k = fam.stiffness(0.0)
    op = OperatorDiscretization(k, fam.weights)
    spec = compute_spectrum(op)
    phi = spec.eigenvectors
    return (phi * np.exp(-spec.eigenvalues * tau)) @ (phi.T * fam.weights[None, :])


def _steps_for(span: float, density: float) -> int:
    return max(1, int(round(span * density)))


def cocycle_residual(fam: FormFamily, s: float, r: float, t: float, steps: int) -> float:
    """``max |U(t,s) - U(t,r) U(r,s)| / max |U(t,s)|`` at matched step density."""
    if not s <= r <= t:
        raise DomainError("cocycle check needs s <= r <= t")
    density = steps / (t - s)
    full = propagate(fam, s, t, steps).matrix
    left = propagate(fam, r, t, _steps_for(t - r, density)).matrix if t > r else np.eye(fam.size)
    right = propagate(fam, s, r, _steps_for(r - s, density)).matrix if r > s else np.eye(fam.size)
    return float(np.abs(full - left @ right).max() / np.abs(full).max())


def richardson_ratio(fam: FormFamily, s: float, t: float, steps: int) -> float:
    """``||U_N - U_2N|| / ||U_2N - U_4N||`` (max norm); about 4 for a second-order scheme."""
    u1 = propagate(fam, s, t, steps).matrix
    u2 = propagate(fam, s, t, 2 * steps).matrix
    u4 = propagate(fam, s, t, 4 * steps).matrix
    return float(np.abs(u1 - u2).max() / np.abs(u2 - u4).max())


def time_modulus(fam: FormFamily, s: float, t: float, deltas, samples: int = 513) -> dict[float, float]:
    """Empirical modulus ``omega(delta) = max |c(tau + delta) - c(tau)|`` over sampled ``tau``."""
    taus = np.linspace(s, t, samples)
    out = {}
    for d in deltas:
        d = float(d)
        vals = [np.abs(fam.coefficients(x + d) - fam.coefficients(x)).max() for x in taus if x + d <= t]
        out[d] = float(max(vals)) if vals else 0.0
    return out


@dataclass
class NonautoKernelScan:
    """Regularity data of ``p_{t,s}``.

    ``column`` is the L2 coordinate-map scan of ``x -> p_{t,s}(x, .)``,
    ``map_constant``/``map_estimate`` the same map measured in the form norm
    ``sqrt(||f||^2 + a(0; f))``, ``joint`` the estimate on the product space.
    """

    s: float
    t: float
    alpha: float
    column: CoordinateScan
    map_constant: float
    map_estimate: HoelderEstimate
    joint: HoelderEstimate
    steps: int
    subsampled: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "s": self.s,
            "t": self.t,
            "alpha": self.alpha,
            "column": {"C": self.column.C, **self.column.estimate.to_dict()},
            "form_norm_map": {"C": self.map_constant, **self.map_estimate.to_dict()},
            "joint": self.joint.to_dict(),
            "steps": self.steps,
            "subsampled": self.subsampled,
        }


def nonauto_kernel_scan(fam: FormFamily, s: float, t: float, alpha: float = 0.5, steps: int = 256) -> NonautoKernelScan:
    if not t > s:
        raise DomainError("kernel is only defined for t > s")
    prop = propagate(fam, s, t, steps)
    w = fam.weights
    p = prop.kernel(w)
    k = KernelMatrix(t - s, p, fam.space, 1, w, None, False)
    col = coordinate_constant(k, NormSpec("lr", 2.0), alpha)
    # form norm at tau = s: ||f||_V^2 = f^T (W + K(s)) f, evaluated via a Cholesky factor
    gram = np.diag(w) + fam.stiffness(s)
    low = cholesky(gram)
    emb = p @ low
    diff = np.sqrt(np.maximum(((emb[:, None, :] - emb[None, :, :]) ** 2).sum(-1), 0.0))
    mask, _ = _valid_pairs(fam.space.dist)
    dd = fam.space.dist[mask]
    map_c = float((diff[mask] / dd**alpha).max())
    map_est = estimate_exponent_from_pairs(fam.space, diff, None, alpha)
    joint, used, sub = _joint_estimate(fam.space, p, alpha, 2500)
    return NonautoKernelScan(s, t, alpha, col, map_c, map_est, joint, steps, sub)
