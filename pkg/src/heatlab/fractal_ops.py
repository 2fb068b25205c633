"""Level-m graph approximations of the Sierpinski gasket.

Vertices live on a triangular lattice: integer coordinates ``(i, j)`` at
scale ``2**m`` map to the plane as ``((i + j/2) / 2**m, (j*sqrt(3)/2) / 2**m)``.
Each level-m cell is a triangle whose three edges carry conductance
``(5/3)**m``; the cell measure ``3**-m`` is lumped equally onto its corners.

The gasket's Hausdorff dimension is ln 3 / ln 2; the measure built here is
the uniform self-similar one and never needs that constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import CapacityError, ValidationError
from .graph_ops import OperatorDiscretization
from .linalg import solve_spd
from .space import HoelderEstimate, SampledSpace, estimate_exponent

MAX_LEVEL = 7
RENORMALIZATION = 5.0 / 3.0


@dataclass
class GasketApproximation:
    level: int
    vertices: np.ndarray  # integer lattice coordinates, shape (n, 2)
    cells: np.ndarray  # vertex ids, shape (3**m, 3)
    conductance: float
    corner_ids: tuple[int, int, int] = (0, 1, 2)
    _resistance: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def coordinates(self) -> np.ndarray:
        s = 2.0**self.level
        i, j = self.vertices[:, 0].astype(float), self.vertices[:, 1].astype(float)
        return np.column_stack([(i + 0.5 * j) / s, (math.sqrt(3) / 2 * j) / s])

    def edges(self) -> np.ndarray:
        c = self.cells
        return np.concatenate([c[:, [0, 1]], c[:, [1, 2]], c[:, [0, 2]]])

    def laplacian(self) -> np.ndarray:
        n = self.size
        lap = np.zeros((n, n))
        e = self.edges()
        a, b = e[:, 0], e[:, 1]
        np.add.at(lap, (a, b), -self.conductance)
        np.add.at(lap, (b, a), -self.conductance)
        np.add.at(lap, (a, a), self.conductance)
        np.add.at(lap, (b, b), self.conductance)
        return lap

    def mass(self) -> np.ndarray:
        w = np.zeros(self.size)
        np.add.at(w, self.cells.ravel(), 3.0 ** (-self.level) / 3.0)
        return w

    def resistance_table(self) -> np.ndarray:
        if self._resistance is None:
            self._resistance = resistance_table(self.laplacian())
        return self._resistance

    def export_block(self) -> dict[str, Any]:
        return {
            "level": self.level,
            "conductance": self.conductance,
            "cells": self.cells.tolist(),
        }


def _subdivide(m: int) -> tuple[np.ndarray, np.ndarray]:
    # corners first so they keep ids 0, 1, 2 at every level
    verts: dict[tuple[int, int], int] = {(0, 0): 0, (1, 0): 1, (0, 1): 2}
    cells = [((0, 0), (1, 0), (0, 1))]
    for _ in range(m):
        verts = {(2 * i, 2 * j): k for (i, j), k in verts.items()}
        new_cells = []
        for a, b, c in cells:
            a, b, c = (2 * a[0], 2 * a[1]), (2 * b[0], 2 * b[1]), (2 * c[0], 2 * c[1])
            ab = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
            ac = ((a[0] + c[0]) // 2, (a[1] + c[1]) // 2)
            bc = ((b[0] + c[0]) // 2, (b[1] + c[1]) // 2)
            for p in (ab, ac, bc):
                if p not in verts:
                    verts[p] = len(verts)
            new_cells += [(a, ab, ac), (ab, b, bc), (ac, bc, c)]
        cells = new_cells
    coords = np.zeros((len(verts), 2), dtype=np.int64)
    for p, k in verts.items():
        coords[k] = p
    cell_ids = np.array([[verts[a], verts[b], verts[c]] for a, b, c in cells], dtype=np.int64)
    return coords, cell_ids


def build_gasket(m: int) -> tuple[GasketApproximation, OperatorDiscretization, SampledSpace, SampledSpace]:
    """Level-``m`` gasket with its operator and two sampled spaces.

    Returns ``(gasket, operator, resistance_space, euclidean_space)``. The
    operator has no Dirichlet set (Neumann-type gasket Laplacian).
    """
    if not isinstance(m, (int, np.integer)) or m < 0:
        raise ValidationError(f"level must be a non-negative integer, got {m!r}")
    if m > MAX_LEVEL:
        raise CapacityError(f"gasket level {m} exceeds the cap {MAX_LEVEL}")
    coords, cells = _subdivide(int(m))
    g = GasketApproximation(int(m), coords, cells, RENORMALIZATION**m)
    w = g.mass()
    op = OperatorDiscretization(g.laplacian(), w, morrey_order_k=1, label=f"gasket-{m}")
    ids = [f"v{k}" for k in range(g.size)]
    xy = g.coordinates
    res_space = SampledSpace(ids, g.resistance_table(), w, xy, {"metric": "resistance"})
    diff = xy[:, None, :] - xy[None, :, :]
    euc_space = SampledSpace(ids, np.sqrt((diff**2).sum(-1)), w, xy, {"metric": "euclidean"})
    return g, op, res_space, euc_space


def resistance_table(lap: np.ndarray, ground: int = 0) -> np.ndarray:
    """All pairwise effective resistances of a connected network.

    Grounds one node and inverts the reduced (SPD) Laplacian column by column.
    """
    n = lap.shape[0]
    if n == 1:
        return np.zeros((1, 1))
    keep = np.array([i for i in range(n) if i != ground])
    red = lap[np.ix_(keep, keep)]
    green = np.zeros((n, n))
    green[np.ix_(keep, keep)] = solve_spd(red, np.eye(n - 1))
    green = 0.5 * (green + green.T)
    diag = np.diag(green)
    r = diag[:, None] + diag[None, :] - 2.0 * green
    np.fill_diagonal(r, 0.0)
    return np.maximum(r, 0.0)


def effective_resistance(g: GasketApproximation | np.ndarray, x: int, y: int) -> float:
    """Effective resistance between vertices ``x`` and ``y``.

    ``g`` may also be a bare network Laplacian. The node ``y`` is grounded
    and a unit current injected at ``x``.
    """
    if x == y:
        return 0.0
    lap = g.laplacian() if isinstance(g, GasketApproximation) else np.asarray(g, dtype=float)
    n = lap.shape[0]
    keep = [i for i in range(n) if i != y]
    rhs = np.zeros(n - 1)
    rhs[keep.index(x)] = 1.0
    pot = solve_spd(lap[np.ix_(keep, keep)], rhs)
    return float(pot[keep.index(x)])


def trace_form(lap: np.ndarray, keep) -> np.ndarray:
    """Schur complement of ``lap`` onto the index set ``keep`` (trace of the energy form)."""
    keep = np.asarray(keep)
    drop = np.setdiff1d(np.arange(lap.shape[0]), keep)
    if drop.size == 0:
        return lap[np.ix_(keep, keep)].copy()
    a = lap[np.ix_(keep, keep)]
    b = lap[np.ix_(keep, drop)]
    c = lap[np.ix_(drop, drop)]
    return a - b @ solve_spd(c, b.T)


def coarse_vertex_map(fine: GasketApproximation, coarse: GasketApproximation) -> np.ndarray:
    """Index in ``fine`` of each vertex of ``coarse`` (lattice coordinates doubled per level)."""
    scale = 2 ** (fine.level - coarse.level)
    lookup = {tuple(p): k for k, p in enumerate(fine.vertices.tolist())}
    return np.array([lookup[(int(i) * scale, int(j) * scale)] for i, j in coarse.vertices])


def resistance_vs_euclidean_scan(
    g: GasketApproximation, f, cutoff_res: float | None = None, cutoff_euc: float | None = None
) -> tuple[HoelderEstimate, HoelderEstimate]:
    """Exponent estimates of ``f`` in the resistance and the Euclidean metric."""
    f = np.asarray(f)
    if f.shape[0] != g.size:
        raise ValidationError("function must have one value per gasket vertex")
    w = g.mass()
    ids = [f"v{k}" for k in range(g.size)]
    xy = g.coordinates
    res = SampledSpace(ids, g.resistance_table(), w)
    diff = xy[:, None, :] - xy[None, :, :]
    euc = SampledSpace(ids, np.sqrt((diff**2).sum(-1)), w)
    # alphas are the predicted exponents, used for the reported seminorms
    est_r = estimate_exponent(res, f, cutoff_res, alpha=0.5)
    est_e = estimate_exponent(euc, f, cutoff_euc, alpha=math.log(5 / 3) / math.log(2))
    return est_r, est_e
