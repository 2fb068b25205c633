"""Regularity scans: Hoelder constants over time grids, blow-up fits, verdicts.

Verdict margins (+0.2 on the blow-up power, -0.15 on the exponent) are
policy of this harness. Exponent predictions are lower bounds: a kernel that
turns out smoother than predicted never fails.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.optimize import minimize_scalar, nnls

from .errors import ContractError, FitError, UndefinedSeminormError, ValidationError
from .graph_ops import OperatorDiscretization
from .kernel_engine import (
    KernelMatrix,
    apply_generator_x,
    apply_generator_y,
    heat_kernel,
    spectral_generator_power,
)
from .space import (
    HoelderEstimate,
    NormSpec,
    SampledSpace,
    _num,
    _valid_pairs,
    estimate_exponent,
    estimate_exponent_from_pairs,
    pairwise_row_distances,
    product_sum_metric,
    subsample_indices,
)

POWER_MARGIN = 0.2
EXPONENT_MARGIN = 0.15
JOINT_CAP = 2500

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class Prediction:
    exponent: float
    power: float | None = None
    source: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"exponent": self.exponent, "power": self.power, "source": self.source}


@dataclass
class ScanConfig:
    t_grid: list[float]
    alpha: float
    norm: NormSpec
    prediction: Prediction
    cutoff: float | None = None

    def __post_init__(self):
        t = [float(x) for x in self.t_grid]
        if len(t) < 6:
            raise ValidationError(f"time grid needs at least 6 points, got {len(t)}")
        if any(x <= 0 for x in t):
            raise ValidationError("time grid must be positive")
        if t != sorted(t) or len(set(t)) != len(t):
            raise ValidationError("time grid must be strictly ascending")
        if math.log10(t[-1] / t[0]) < 2 - 1e-9:
            raise ValidationError("time grid must span at least two decades")
        if not 0 < self.alpha <= 1:
            raise ValidationError(f"alpha must lie in (0, 1], got {self.alpha}")
        self.t_grid = t


@dataclass
class ScanPoint:
    t: float
    C: float
    seminorm: float
    exponent: float
    stderr: float = math.nan

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "C": _num(self.C),
            "seminorm": _num(self.seminorm),
            "exponent": _num(self.exponent),
            "stderr": _num(self.stderr),
        }


@dataclass
class BlowupFit:
    C1: float
    C2: float
    p: float
    residual: float
    loglog_slope: float = math.nan

    def to_dict(self) -> dict[str, Any]:
        return {
            "C1": _num(self.C1),
            "C2": _num(self.C2),
            "p": _num(self.p),
            "residual": _num(self.residual),
            "loglog_slope": _num(self.loglog_slope),
        }


@dataclass
class HoelderReport:
    instance: str
    prediction: Prediction
    per_t: list[ScanPoint]
    fit: BlowupFit | None
    verdict: str
    reasons: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_dict(self) -> dict[str, Any]:
        return {
            "instance": self.instance,
            "prediction": self.prediction.to_dict(),
            "per_t": [p.to_dict() for p in self.per_t],
            "fit": None if self.fit is None else self.fit.to_dict(),
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "margins": {"power": POWER_MARGIN, "exponent": EXPONENT_MARGIN},
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["instance", "t", "C", "seminorm", "exponent", "stderr", "C1", "C2", "p", "residual", "verdict"])
        f = self.fit.to_dict() if self.fit else {}
        for pt in self.per_t:
            row = pt.to_dict()
            wr.writerow(
                [self.instance]
                + ["" if row[k] is None else repr(row[k]) for k in ("t", "C", "seminorm", "exponent", "stderr")]
                + ["" if f.get(k) is None else repr(f[k]) for k in ("C1", "C2", "p", "residual")]
                + [self.verdict]
            )
        return buf.getvalue()


# -- blow-up fits ----------------------------------------------------------------


def _two_term(t: np.ndarray, c: np.ndarray, p: float) -> tuple[np.ndarray, float]:
    """Non-negative least squares for ``C1 + C2 t^-p`` in relative residual."""
    basis = np.column_stack([np.ones_like(t), t ** (-p)]) / c[:, None]
    coef, rnorm = nnls(basis, np.ones_like(t))
    return coef, float(rnorm)


def fit_power(t, c) -> tuple[float, float]:
    """Blow-up power ``p`` of ``C1 + C2 t^-p`` (``C1, C2 >= 0``) by variable projection.

    Returns ``(p, relative residual)``.
    """
    t = np.asarray(t, dtype=float)
    c = np.asarray(c, dtype=float)
    if t.size < 3 or np.any(c <= 0) or not np.all(np.isfinite(c)):
        raise FitError("power fit needs at least 3 positive finite constants")
    grid = np.linspace(0.0, 8.0, 321)
    res = np.array([_two_term(t, c, p)[1] for p in grid])
    k = int(np.argmin(res))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    opt = minimize_scalar(lambda p: _two_term(t, c, p)[1], bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    p = float(opt.x) if opt.fun <= res[k] else float(grid[k])
    return p, _two_term(t, c, p)[1]


def fit_blowup(t_grid, constants, p_star: float) -> BlowupFit:
    """Fit ``C(t) ~ C1 + C2 t^-p``.

    ``p`` comes from the smallest-t half of the grid; ``(C1, C2)`` are ordinary
    least squares on the full grid in the basis ``{1, t^-p_star}``.
    """
    t = np.asarray(t_grid, dtype=float)
    c = np.asarray(constants, dtype=float)
    half = max(3, (t.size + 1) // 2)
    small = np.argsort(t)[:half]
    p, _ = fit_power(t[small], c[small])
    lt, lc = np.log(t[small]), np.log(c[small])
    slope = -float(np.polyfit(lt, lc, 1)[0])
    basis = np.column_stack([np.ones_like(t), t ** (-p_star)])
    coef, *_ = np.linalg.lstsq(basis, c, rcond=None)
    resid = float(np.linalg.norm(basis @ coef - c) / np.linalg.norm(c))
    return BlowupFit(float(coef[0]), float(coef[1]), p, resid, slope)


# -- one-coordinate scans -------------------------------------------------------


@dataclass
class CoordinateScan:
    C: float
    seminorm: float
    estimate: HoelderEstimate
    distances: np.ndarray


def coordinate_constant(
    k: KernelMatrix,
    norm: NormSpec,
    alpha: float,
    operator: OperatorDiscretization | None = None,
    cutoff: float | None = None,
    space: SampledSpace | None = None,
) -> CoordinateScan:
    """Hoelder data of ``x -> p_t(x, .)`` at one time.

    ``C`` is the sup of ``||p_t(x,.) - p_t(x',.)|| / d(x,x')^alpha`` in the
    norm ``norm``; ``seminorm`` is the largest pointwise Hoelder seminorm of
    ``x -> p_t(x, y)`` over ``y``; the fitted exponent comes from the binned
    row distances.
    """
    s = space if space is not None else k.space
    if s is None:
        raise ValidationError("kernel has no sampled space")
    images = None
    if norm.kind == "graph":
        op = operator if operator is not None else norm.operator
        images = apply_generator_y(k, op)
    rows = k.values
    dist = pairwise_row_distances(k.weights, rows, norm, images)
    mask, _ = _valid_pairs(s.dist)
    if not mask.any():
        raise UndefinedSeminormError("no pair at finite positive distance")
    d = s.dist[mask]
    c = float((dist[mask] / d**alpha).max())
    # pointwise: max over y of the column seminorm = max over pairs of the sup-norm row distance
    sup = pairwise_row_distances(k.weights, rows, NormSpec("sup"))
    semi = float((sup[mask] / d**alpha).max())
    est = estimate_exponent_from_pairs(s, dist, cutoff, alpha)
    return CoordinateScan(c, semi, est, dist)


def scan_constants(
    k_provider: Callable[[float], KernelMatrix],
    cfg: ScanConfig,
    instance: str = "",
    operator: OperatorDiscretization | None = None,
) -> HoelderReport:
    points = []
    reasons = []
    for t in cfg.t_grid:
        k = k_provider(t)
        try:
            cs = coordinate_constant(k, cfg.norm, cfg.alpha, operator, cfg.cutoff)
            e = cs.estimate
            points.append(ScanPoint(t, cs.C, cs.seminorm, e.fitted_exponent, e.fit_stderr))
        except (FitError, UndefinedSeminormError) as exc:
            reasons.append(f"t={t:g}: {exc}")
            points.append(ScanPoint(t, math.nan, math.nan, math.nan))
    fit = None
    pred = cfg.prediction
    cs_ = np.array([p.C for p in points])
    if np.all(np.isfinite(cs_)) and np.all(cs_ > 0):
        try:
            fit = fit_blowup(cfg.t_grid, cs_, pred.power if pred.power is not None else 0.0)
        except FitError as exc:
            reasons.append(f"blow-up fit: {exc}")
    verdict = _verdict(points, fit, pred, reasons)
    extra = {
        "alpha": cfg.alpha,
        "norm": cfg.norm.describe(),
        "monotone_C": bool(np.all(np.diff(cs_) <= 1e-12 * np.nanmax(np.abs(cs_)))) if np.all(np.isfinite(cs_)) else None,
    }
    return HoelderReport(instance, pred, points, fit, verdict, reasons, extra)


def _verdict(points: list[ScanPoint], fit: BlowupFit | None, pred: Prediction, reasons: list[str]) -> str:
    exps = [p.exponent for p in points]
    if reasons or any(not math.isfinite(e) for e in exps):
        if not reasons:
            reasons.append("exponent undefined at some grid time")
        return INCONCLUSIVE
    verdict = PASS
    low = min(exps)
    if low < pred.exponent - EXPONENT_MARGIN:
        reasons.append(f"smallest fitted exponent {low:.4f} below {pred.exponent} - {EXPONENT_MARGIN}")
        verdict = FAIL
    if pred.power is not None:
        if fit is None:
            reasons.append("no blow-up fit available")
            return INCONCLUSIVE if verdict == PASS else verdict
        if fit.p > pred.power + POWER_MARGIN:
            reasons.append(f"fitted power {fit.p:.4f} above {pred.power} + {POWER_MARGIN}")
            verdict = FAIL
    return verdict


# -- joint scans ---------------------------------------------------------------


@dataclass
class JointResult:
    estimate: HoelderEstimate
    factor_M: float = math.nan
    factor_C: float = math.nan
    points_used: int = 0
    subsampled: bool = False

    @property
    def bound(self) -> float:
        return self.factor_M * self.factor_C

    @property
    def within_bound(self) -> bool:
        return self.estimate.seminorm_at_alpha <= self.bound * (1 + 1e-6)

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.estimate.to_dict(),
            "M": _num(self.factor_M),
            "C_half": _num(self.factor_C),
            "bound": _num(self.bound),
            "within_bound": bool(self.within_bound) if math.isfinite(self.bound) else None,
            "points_used": self.points_used,
            "subsampled": self.subsampled,
        }


def _joint_estimate(
    space: SampledSpace, values: np.ndarray, alpha: float, cap: int, cutoff: float | None = None
) -> tuple[HoelderEstimate, int, bool]:
    n = space.size
    per_axis = min(n, int(math.isqrt(cap)))
    idx = subsample_indices(n, per_axis)
    sub = space.subspace(idx)
    prod = product_sum_metric(sub, cap=cap)
    f = np.asarray(values)[np.ix_(idx, idx)].ravel()
    if np.iscomplexobj(f):
        f = np.column_stack([f.real, f.imag])
    est = estimate_exponent(prod, f, cutoff=cutoff, alpha=alpha)
    return est, idx.size, idx.size < n


def joint_scan(k: KernelMatrix, alpha: float, cap: int = JOINT_CAP, cutoff: float | None = None) -> JointResult:
    """Hoelder estimate of ``(x, y) -> p_t(x, y)`` on the product sum-metric space.

    Also returns the factorized bound ``M(t) C(t/2)``: ``M`` is the largest
    weighted L2 norm of a row or column of ``p_{t/2}`` and ``C`` the
    one-coordinate L2 Hoelder constant of ``p_{t/2}``.
    """
    if k.space is None:
        raise ValidationError("kernel has no sampled space")
    est, used, sub = _joint_estimate(k.space, k.values, alpha, cap, cutoff)
    res = JointResult(est, points_used=used, subsampled=sub)
    if k.spectral is not None:
        half = heat_kernel(k.spectral, t=k.t / 2, space=k.space)
        w = half.weights
        rows = np.sqrt((np.abs(half.values) ** 2 * w[None, :]).sum(axis=1)).max()
        cols = np.sqrt((np.abs(half.values) ** 2 * w[:, None]).sum(axis=0)).max()
        res.factor_M = float(max(rows, cols))
        res.factor_C = coordinate_constant(half, NormSpec("lr", 2.0), alpha).C
    return res


@dataclass
class SecondOrderResult:
    estimate: HoelderEstimate
    cross_check: float
    points_used: int
    subsampled: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.estimate.to_dict(),
            "cross_check": self.cross_check,
            "points_used": self.points_used,
            "subsampled": self.subsampled,
        }


def second_order_scan(
    k: KernelMatrix, d: OperatorDiscretization, alpha: float, cap: int = JOINT_CAP, cutoff: float | None = None
) -> SecondOrderResult:
    """Joint Hoelder estimate of ``A_x A_y p_t``.

    The kernel is formed spectrally (``Phi Lam^2 exp(-Lam t) Phi^T``) because
    applying the stiffness twice loses accuracy at fine meshes. It is checked
    against the pairing of ``A_y p_{t/2}`` with ``A_x p_{t/2}`` under the
    quadrature weights.
    """
    if not (k.self_adjoint and d.self_adjoint):
        raise ContractError("second-order kernel regularity needs a self-adjoint generator")
    if k.space is None or k.spectral is None:
        raise ValidationError("kernel needs an attached space and spectral data")
    g = spectral_generator_power(k, 2)
    half = heat_kernel(k.spectral, t=k.t / 2, space=k.space)
    q1 = apply_generator_x(half, d)
    q2 = apply_generator_y(half, d)
    cross = (q2 * half.weights[None, :]) @ q1
    check = float(np.abs(cross - g).max() / np.abs(g).max())
    est, used, sub = _joint_estimate(k.space, g, alpha, cap, cutoff)
    return SecondOrderResult(est, check, used, sub)
