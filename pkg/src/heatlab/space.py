"""Sampled generalized metric measure spaces and Hoelder diagnostics.

A :class:`SampledSpace` is a finite quadrature proxy for ``(X, d, mu)``:
point identifiers, a dense distance table whose entries may be ``+inf``
(points in different components of a disjoint union), and positive weights.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import CapacityError, DimensionError, FitError, UndefinedSeminormError, ValidationError

log = logging.getLogger(__name__)

INF = math.inf
INF_TOKEN = "inf"
BINS_PER_DECADE = 12
PRODUCT_CAP = 4096


@dataclass
class SampledSpace:
    point_ids: list[str]
    dist: np.ndarray
    weights: np.ndarray
    coordinates: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.dist = np.asarray(self.dist, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        n = len(self.point_ids)
        if self.dist.shape != (n, n):
            raise DimensionError(f"distance table has shape {self.dist.shape}, expected {(n, n)}")
        if self.weights.shape != (n,):
            raise DimensionError("one weight per point is required")
        if n and np.any(self.weights <= 0):
            raise ValidationError("weights must be strictly positive")
        if n and not np.isfinite(self.weights.sum()):
            raise ValidationError("total weight must be finite")
        if self.coordinates is not None:
            self.coordinates = np.asarray(self.coordinates, dtype=float)

    @property
    def size(self) -> int:
        return len(self.point_ids)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def diameter(self) -> float:
        """Largest finite distance."""
        finite = self.dist[np.isfinite(self.dist)]
        return float(finite.max()) if finite.size else 0.0

    def index(self, point_id: str) -> int:
        try:
            return self.point_ids.index(point_id)
        except ValueError:
            raise KeyError(f"unknown point id {point_id!r}") from None

    def check_metric(self, atol: float = 1e-12) -> None:
        """Symmetry, zero diagonal and triangle inequality on all finite triples."""
        d = self.dist
        if np.any(d < 0):
            raise ValidationError("negative distance")
        if np.any(np.diag(d) != 0):
            raise ValidationError("non-zero diagonal")
        fin = np.isfinite(d)
        if not np.array_equal(fin, fin.T) or np.abs(np.where(fin, d - d.T, 0.0)).max(initial=0) > atol:
            raise ValidationError("distance table is not symmetric")
        for k in range(self.size):
            via = d[:, k][:, None] + d[k, :][None, :]
            if np.any(d > via + atol * np.maximum(1.0, via)):
                raise ValidationError(f"triangle inequality violated through point {self.point_ids[k]!r}")

    def subspace(self, idx: Sequence[int]) -> SampledSpace:
        idx = np.asarray(idx, dtype=int)
        coords = None if self.coordinates is None else self.coordinates[idx]
        return SampledSpace(
            [self.point_ids[i] for i in idx],
            self.dist[np.ix_(idx, idx)],
            self.weights[idx],
            coords,
            dict(self.meta),
        )

    # JSON document: {points:[{id, coord?}], dist:[row-major, "inf" sentinel], weights:[...]}
    def to_json_dict(self) -> dict[str, Any]:
        points = []
        for i, pid in enumerate(self.point_ids):
            entry: dict[str, Any] = {"id": pid}
            if self.coordinates is not None:
                entry["coord"] = [float(c) for c in np.atleast_1d(self.coordinates[i])]
            points.append(entry)
        flat = [INF_TOKEN if math.isinf(v) else float(v) for v in self.dist.ravel()]
        doc: dict[str, Any] = {
            "points": points,
            "dist": flat,
            "weights": [float(w) for w in self.weights],
        }
        if self.meta:
            doc.update(self.meta)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, doc: dict[str, Any]) -> SampledSpace:
        pts = doc["points"]
        n = len(pts)
        flat = doc["dist"]
        if len(flat) != n * n:
            raise DimensionError(f"dist must have {n * n} entries, got {len(flat)}")
        dist = np.array([INF if v == INF_TOKEN else float(v) for v in flat], dtype=float).reshape(n, n)
        coords = None
        if n and all("coord" in p for p in pts):
            coords = np.array([p["coord"] for p in pts], dtype=float)
        extra = {k: v for k, v in doc.items() if k not in ("points", "dist", "weights")}
        return cls([str(p["id"]) for p in pts], dist, np.array(doc["weights"], dtype=float), coords, extra)

    @classmethod
    def from_json(cls, text: str) -> SampledSpace:
        return cls.from_json_dict(json.loads(text))


def euclidean_space(coords, weights, ids: Sequence[str] | None = None) -> SampledSpace:
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    ids = list(ids) if ids is not None else [str(i) for i in range(len(coords))]
    return SampledSpace(ids, cdist(coords, coords), np.asarray(weights, dtype=float), coords)


def disjoint_union(a: SampledSpace, b: SampledSpace, tags: tuple[str, str] = ("0", "1")) -> SampledSpace:
    """``a`` and ``b`` side by side, every cross distance ``+inf``."""
    if a.size == 0:
        return b
    if b.size == 0:
        return a
    na, nb = a.size, b.size
    dist = np.full((na + nb, na + nb), INF)
    dist[:na, :na] = a.dist
    dist[na:, na:] = b.dist
    ids = [f"{tags[0]}:{p}" for p in a.point_ids] + [f"{tags[1]}:{p}" for p in b.point_ids]
    coords = None
    if a.coordinates is not None and b.coordinates is not None and a.coordinates.shape[1:] == b.coordinates.shape[1:]:
        coords = np.concatenate([a.coordinates, b.coordinates])
    return SampledSpace(ids, dist, np.concatenate([a.weights, b.weights]), coords)


def product_sum_metric(s: SampledSpace, cap: int = PRODUCT_CAP) -> SampledSpace:
    """``X x X`` with ``d((x,y),(x',y')) = d(x,x') + d(y,y')`` and product weights.

    Points are ordered with the first coordinate varying slowest.
    """
    n = s.size
    if n * n > cap:
        raise CapacityError(f"product space would have {n * n} points (cap {cap})")
    d = s.dist
    dist = (d[:, None, :, None] + d[None, :, None, :]).reshape(n * n, n * n)
    ids = [f"({p},{q})" for p in s.point_ids for q in s.point_ids]
    w = np.outer(s.weights, s.weights).ravel()
    return SampledSpace(ids, dist, w)


def _valid_pairs(dist: np.ndarray) -> tuple[np.ndarray, int]:
    """Upper-triangle mask of pairs with finite positive distance; also counts zero-distance pairs."""
    iu = np.triu(np.ones(dist.shape, dtype=bool), k=1)
    zero = iu & (dist == 0)
    return iu & np.isfinite(dist) & (dist > 0), int(zero.sum())


def hoelder_seminorm(s: SampledSpace, f, alpha: float) -> float:
    """``max |f(x) - f(x')| / d(x, x')**alpha`` over pairs at finite non-zero distance."""
    if not 0 < alpha <= 1:
        raise ValidationError(f"alpha must lie in (0, 1], got {alpha}")
    f = np.asarray(f)
    if f.shape[0] != s.size:
        raise DimensionError("function must have one value per point")
    mask, zero_pairs = _valid_pairs(s.dist)
    if zero_pairs:
        log.warning("%d distinct point pairs at distance 0 excluded from the seminorm", zero_pairs)
    if not mask.any():
        raise UndefinedSeminormError("no pair of points at finite positive distance")
    diff = _pair_differences(f)
    return float((diff[mask] / s.dist[mask] ** alpha).max())


def _pair_differences(f: np.ndarray) -> np.ndarray:
    if f.ndim == 1:
        return np.abs(f[:, None] - f[None, :])
    # vector-valued: Euclidean norm of the difference
    return cdist(f.reshape(f.shape[0], -1), f.reshape(f.shape[0], -1))


@dataclass
class HoelderEstimate:
    seminorm_at_alpha: float
    fitted_exponent: float
    fit_stderr: float
    bins_used: int
    alpha: float = 1.0
    cutoff: float = 0.0

    @property
    def defined(self) -> bool:
        return math.isfinite(self.fitted_exponent)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seminorm": _num(self.seminorm_at_alpha),
            "alpha": self.alpha,
            "exponent": _num(self.fitted_exponent),
            "stderr": _num(self.fit_stderr),
            "bins": self.bins_used,
            "cutoff": _num(self.cutoff),
        }


def _num(x: float):
    return None if x is None or not math.isfinite(x) else float(x)


class BinnedSup:
    """Per-bin supremum of pair differences on logarithmic distance bins.

    Bins are ``BINS_PER_DECADE`` per decade and fixed in absolute position
    (edges at ``10**(k / BINS_PER_DECADE)``), so chunked accumulation is
    order independent.
    """

    def __init__(self, cutoff: float):
        self.cutoff = cutoff
        self.sup: dict[int, float] = {}
        self.dmax: dict[int, float] = {}

    def add(self, d: np.ndarray, diff: np.ndarray) -> None:
        keep = np.isfinite(d) & (d > 0) & (d <= self.cutoff)
        if not keep.any():
            return
        d = d[keep]
        diff = diff[keep]
        k = np.floor(np.log10(d) * BINS_PER_DECADE + 1e-9).astype(np.int64)
        for b in np.unique(k):
            sel = k == b
            b = int(b)
            self.sup[b] = max(self.sup.get(b, 0.0), float(diff[sel].max()))
            self.dmax[b] = max(self.dmax.get(b, 0.0), float(d[sel].max()))

    def fit(self) -> tuple[float, float, int]:
        """Least-squares slope of ``log sup`` against ``log d``; returns (slope, stderr, bins)."""
        keys = sorted(b for b in self.sup if self.sup[b] > 0)
        if all(self.sup[b] == 0 for b in self.sup):
            return math.nan, math.nan, 0
        if len(keys) < 3:
            raise FitError(f"only {len(keys)} non-empty distance bins below cutoff {self.cutoff:g}; need 3")
        x = np.log(np.array([self.dmax[b] for b in keys]))
        y = np.log(np.array([self.sup[b] for b in keys]))
        return (*_ols_slope(x, y), len(keys))


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm = x - x.mean()
    sxx = float(xm @ xm)
    if sxx == 0:
        raise FitError("degenerate regression: all bins at the same distance")
    slope = float(xm @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xm
    dof = len(x) - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else math.nan
    return slope, stderr


def default_cutoff(s: SampledSpace) -> float:
    return s.diameter() / 4.0


def estimate_exponent(s: SampledSpace, f, cutoff: float | None = None, alpha: float = 1.0) -> HoelderEstimate:
    """Fit the local Hoelder exponent of ``f`` from binned pair differences.

    ``f`` may be scalar per point or a row per point (vector-valued map, in
    which case differences are Euclidean norms of rows). Constant ``f`` yields a
    degenerate estimate with zero seminorm and an undefined (NaN) exponent.
    """
    f = np.asarray(f)
    diff = _pair_differences(f)
    return estimate_exponent_from_pairs(s, diff, cutoff, alpha)


def estimate_exponent_from_pairs(
    s: SampledSpace, diff: np.ndarray, cutoff: float | None = None, alpha: float = 1.0
) -> HoelderEstimate:
    """Same as :func:`estimate_exponent` with a precomputed pairwise difference table."""
    cutoff = default_cutoff(s) if cutoff is None else cutoff
    mask, _ = _valid_pairs(s.dist)
    if not mask.any():
        raise UndefinedSeminormError("no pair of points at finite positive distance")
    d = s.dist[mask]
    dv = diff[mask]
    semi = float((dv / d**alpha).max())
    acc = BinnedSup(cutoff)
    acc.add(d, dv)
    slope, stderr, bins = acc.fit()
    return HoelderEstimate(semi, slope, stderr, bins, alpha, cutoff)


@dataclass
class NormSpec:
    """Norm used to compare functions on a sampled space.

    ``kind`` is ``"lr"`` (weighted, exponent ``r``), ``"sup"`` or ``"graph"``.
    The graph norm is ``||f||_r + ||A f||_r`` with ``A`` the generator of
    ``operator`` (anything exposing a ``generator`` matrix).
    """

    kind: str = "lr"
    r: float = 2.0
    operator: Any = None

    def __post_init__(self):
        if self.kind not in ("lr", "sup", "graph"):
            raise ValidationError(f"unknown norm kind {self.kind!r}")
        if self.kind != "sup" and not (1 <= self.r < math.inf):
            raise ValidationError("r must be finite and at least 1; use kind='sup' for the max norm")
        if self.kind == "graph" and self.operator is None:
            raise ValidationError("graph norm requires an operator")

    def generator(self) -> np.ndarray:
        op = self.operator
        return np.asarray(op.generator if hasattr(op, "generator") else op)

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "r": None if self.kind == "sup" else self.r}


def _lr(w: np.ndarray, v: np.ndarray, r: float) -> float:
    return float((w * np.abs(v) ** r).sum() ** (1.0 / r))


def norm_distance(s: SampledSpace, spec: NormSpec, f, g) -> float:
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != (s.size,) or g.shape != (s.size,):
        raise DimensionError("both functions need one value per point")
    h = f - g
    if spec.kind == "sup":
        return float(np.abs(h).max(initial=0.0))
    base = _lr(s.weights, h, spec.r)
    if spec.kind == "lr":
        return base
    return base + _lr(s.weights, spec.generator() @ h, spec.r)


def pairwise_row_distances(weights: np.ndarray, rows: np.ndarray, spec: NormSpec, images: np.ndarray | None = None) -> np.ndarray:
    """``D[i, j] = ||rows[i] - rows[j]||`` in the norm ``spec`` (weights on the columns).

    For the graph norm ``images`` must hold ``A`` applied to each row.
    """
    rows = np.asarray(rows)
    if spec.kind == "sup":
        return cdist(rows, rows, "chebyshev")
    out = cdist(rows, rows, "minkowski", p=spec.r, w=weights)
    if spec.kind == "graph":
        if images is None:
            raise ValidationError("graph norm needs operator images of the rows")
        out = out + cdist(images, images, "minkowski", p=spec.r, w=weights)
    return out


def finite_pairs(dist: np.ndarray) -> Iterator[tuple[int, int]]:
    mask, _ = _valid_pairs(dist)
    for i, j in zip(*np.nonzero(mask)):
        yield int(i), int(j)


def subsample_indices(n: int, k: int) -> np.ndarray:
    """``k`` evenly spread indices out of ``range(n)``, always including both ends."""
    if k >= n:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, k)).astype(int))


def count_infinite_pairs(dist: np.ndarray) -> int:
    iu = np.triu(np.ones(dist.shape, dtype=bool), k=1)
    return int((iu & ~np.isfinite(dist)).sum())


def sum_of(values: Iterable[float]) -> float:
    return float(math.fsum(values))
