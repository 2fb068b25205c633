"""Command line front end: scenario files in, spectra, kernels and reports out.

    heatlab run <scenario.json> [--out DIR] [--quiet]
    heatlab list-checks
    heatlab export-space <scenario.json>

Exit codes of ``run``: 0 every check passed, 2 some check failed,
3 some check inconclusive (and none failed), 4 invalid scenario.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np

from . import __version__
from .damped_wave import (
    block_symmetry_residual,
    interval_system,
    mode_exponential,
    mode_matrix,
    wave_bound_scan,
    wave_kernel,
)
from .errors import FitError, HeatlabError, ScenarioError, UndefinedSeminormError
from .fractal_ops import build_gasket, resistance_vs_euclidean_scan
from .graph_ops import MetricGraph, OperatorDiscretization, discretize_graph, kirchhoff_defect
from .kernel_engine import (
    chapman_kolmogorov_residual,
    compute_spectrum,
    heat_kernel,
    mass_residual,
    symmetry_residual,
    time_derivative_deviation,
)
from .linalg import expm_oracle
from .nonauto import FormFamily, autonomous_reference, cocycle_residual, nonauto_kernel_scan, propagate, richardson_ratio
from .regcheck import FAIL, INCONCLUSIVE, PASS, Prediction, ScanConfig, joint_scan, scan_constants, second_order_scan
from .space import NormSpec, _num, estimate_exponent

log = logging.getLogger("heatlab")

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_SCHEMA = 0, 2, 3, 4

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["name", "instance", "checks"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "description": {"type": "string"},
        "instance": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["graph", "gasket", "wave", "nonauto"]},
                "file": {"type": "string"},
                "metric": {"enum": ["resistance", "euclidean"]},
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "preset": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["constant", "sin_modulated", "tabulated"]},
                        "base": {"type": "number"},
                        "amplitude": {"type": "number"},
                        "frequency": {"type": "number"},
                        "times": {"type": "array", "items": {"type": "number"}},
                        "values": {"type": "array"},
                    },
                    "additionalProperties": False,
                },
                "potential": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "mesh": {
            "type": "object",
            "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "level": {"type": "integer", "minimum": 0},
                "n_interval_points": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "times": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
                "additionalProperties": False,
            },
        },
        "output_dir": {"type": "string"},
    },
}


# -- instance ------------------------------------------------------------------


class Instance:
    """Lazily built objects for one scenario instance."""

    def __init__(self, doc: dict[str, Any], base_dir: Path):
        self.doc = doc
        self.kind = doc["instance"]["kind"]
        self.inst = doc["instance"]
        self.mesh = doc.get("mesh", {})
        self.base_dir = base_dir
        self._cache: dict[str, Any] = {}
        self._kernels: dict[float, Any] = {}
        self._validate()

    def _validate(self) -> None:
        need = {"graph": ("file", "h"), "nonauto": ("file", "h"), "gasket": ("level",), "wave": ("n_interval_points",)}
        for key in need[self.kind]:
            if key not in self.inst and key not in self.mesh:
                where = "instance" if key == "file" else "mesh"
                raise ScenarioError(f"{where}.{key}: required for a {self.kind} instance")
        if "file" in self.inst and not self.graph_path.is_file():
            raise ScenarioError(f"instance.file: {self.inst['file']} not found")

    @property
    def graph_path(self) -> Path:
        return (self.base_dir / self.inst["file"]).resolve()

    def _get(self, key: str, build: Callable[[], Any]) -> Any:
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def graph(self) -> MetricGraph:
        return self._get("graph", lambda: MetricGraph.load(self.graph_path))

    @property
    def gasket(self):
        return self._get("gasket", lambda: build_gasket(int(self.mesh["level"])))

    @property
    def wave(self):
        return self._get("wave", lambda: interval_system(int(self.mesh["n_interval_points"]), float(self.inst.get("rho", 1.0))))

    @property
    def family(self) -> FormFamily:
        def build():
            p = self.inst.get("preset", {"kind": "constant"})
            return FormFamily(
                self.graph,
                float(self.mesh["h"]),
                p["kind"],
                float(p.get("base", 1.0)),
                float(p.get("amplitude", 0.0)),
                float(p.get("frequency", 1.0)),
                p.get("times"),
                p.get("values"),
                float(self.inst.get("potential", 0.0)),
            )

        return self._get("family", build)

    @property
    def discretization(self):
        def build():
            if self.kind == "graph":
                return discretize_graph(self.graph, float(self.mesh["h"]))
            if self.kind == "gasket":
                g, op, rs, es = self.gasket
                return op, (es if self.inst.get("metric") == "euclidean" else rs)
            if self.kind == "wave":
                sys_ = self.wave
                return None, sys_.space
            fam = self.family
            return fam.op, fam.space

        return self._get("disc", build)

    @property
    def op(self):
        return self.discretization[0]

    @property
    def space(self):
        return self.discretization[1]

    @property
    def spectrum(self):
        def build():
            if self.kind == "wave":
                return self.wave.base_spec
            if self.kind == "nonauto":
                fam = self.family
                return compute_spectrum(OperatorDiscretization(fam.stiffness(0.0), fam.weights))
            return compute_spectrum(self.op)

        return self._get("spectrum", build)

    def kernel(self, t: float):
        t = float(t)
        if t not in self._kernels:
            if self.kind == "wave":
                self._kernels[t] = wave_kernel(self.wave, t)
            else:
                self._kernels[t] = heat_kernel(self.spectrum, t=t, space=self.space, self_adjoint=self.op.self_adjoint)
        return self._kernels[t]

    def point(self, ref) -> int:
        """Index of a point given by id or integer index."""
        if isinstance(ref, int):
            return ref
        return self.space.index(str(ref))


# -- checks ----------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    anchor: str
    verdict: str
    metrics: dict[str, Any] = field(default_factory=dict)
    reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "verdict": self.verdict,
            "metrics": _clean(self.metrics),
            "reasons": list(self.reasons),
        }


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return obj


def _le(value: float, tol: float, label: str, reasons: list[str]) -> bool:
    ok = bool(value <= tol)
    if not ok:
        reasons.append(f"{label} = {value:.3e} exceeds {tol:.1e}")
    return ok


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


@dataclass
class Check:
    name: str
    anchor: str
    summary: str
    kinds: tuple[str, ...]
    fn: Callable[[Instance, dict[str, Any]], CheckResult]


CATALOGUE: dict[str, Check] = {}


def check(name: str, anchor: str, summary: str, kinds: tuple[str, ...]):
    def deco(fn):
        CATALOGUE[name] = Check(name, anchor, summary, kinds, fn)
        return fn

    return deco


def _result(inst_check: str, ok: bool, metrics: dict[str, Any], reasons: list[str]) -> CheckResult:
    c = CATALOGUE[inst_check]
    return CheckResult(c.name, c.anchor, _verdict(ok), metrics, reasons)


@check("spectrum", "discretization:analytic-spectrum", "lowest eigenvalues against (n pi / L)^2", ("graph", "gasket", "wave", "nonauto"))
def _spectrum(inst: Instance, p: dict[str, Any]) -> CheckResult:
    count = int(p.get("count", 5))
    lam = inst.spectrum.eigenvalues[:count]
    metrics: dict[str, Any] = {"eigenvalues": lam.tolist()}
    reasons: list[str] = []
    ok = True
    if "dirichlet_length" in p:
        length = float(p["dirichlet_length"])
        exact = (np.arange(1, count + 1) * math.pi / length) ** 2
        rel = np.abs(lam - exact) / exact
        rtol = float(p.get("rtol", 0.005))
        metrics.update(exact=exact.tolist(), relative_error=rel.tolist(), rtol=rtol)
        ok = bool(np.all(rel <= rtol))
        if not ok:
            reasons.append(f"largest relative error {rel.max():.3e} exceeds {rtol}")
    return _result("spectrum", ok, metrics, reasons)


@check("chapman_kolmogorov", "kernel-axiom:composition", "p_{t+s} = p_t W p_s", ("graph", "gasket", "nonauto"))
def _ck(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t, s = float(p.get("t", 0.1)), float(p.get("s", 0.1))
    tol = float(p.get("tol", 1e-8))
    r = chapman_kolmogorov_residual(inst.kernel(t), inst.kernel(s), inst.kernel(t + s))
    reasons: list[str] = []
    return _result("chapman_kolmogorov", _le(r, tol, "residual", reasons), {"t": t, "s": s, "residual": r, "tol": tol}, reasons)


@check("symmetry", "kernel-axiom:adjoint-symmetry", "p_t(x,y) = p_t(y,x) for self-adjoint generators", ("graph", "gasket", "nonauto"))
def _sym(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.1))
    tol = float(p.get("tol", 1e-9))
    r = symmetry_residual(inst.kernel(t))
    reasons: list[str] = []
    return _result("symmetry", _le(r, tol, "residual", reasons), {"t": t, "residual": r, "tol": tol}, reasons)


@check("time_derivative", "kernel-axiom:time-derivative", "central difference in t against A_x p_t", ("graph", "gasket"))
def _dt(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.2))
    delta = float(p.get("delta", 1e-4))
    tol = float(p.get("tol", 1e-5))
    dev = time_derivative_deviation(inst.spectrum, inst.op, t, delta)
    reasons: list[str] = []
    return _result("time_derivative", _le(dev, tol, "deviation", reasons), {"t": t, "delta": delta, "deviation": dev, "tol": tol}, reasons)


@check("mass_conservation", "kernel-axiom:conservative", "sum_j p_t(x_i, x_j) w_j = 1 without Dirichlet vertices", ("graph", "gasket"))
def _mass(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.1))
    tol = float(p.get("tol", 1e-8))
    k = inst.kernel(t)
    r = mass_residual(k)
    lo = float(k.values.min() / np.abs(k.values).max())
    reasons: list[str] = []
    ok = _le(r, tol, "mass defect", reasons)
    if lo < -1e-9:
        reasons.append(f"negative kernel entry (relative {lo:.3e})")
        ok = False
    return _result("mass_conservation", ok, {"t": t, "residual": r, "min_relative_entry": lo, "tol": tol}, reasons)


@check("hoelder_exponent", "regularity:one-coordinate", "fitted exponent of x -> p_t(x, y0)", ("graph", "gasket"))
def _hexp(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.05))
    y = inst.point(p["y"])
    alpha = float(p.get("alpha", 1.0))
    est = estimate_exponent(inst.space, inst.kernel(t).values[:, y], p.get("cutoff"), alpha)
    metrics = {"t": t, "y": p["y"], **est.to_dict()}
    return _exponent_verdict("hoelder_exponent", est.fitted_exponent, p, metrics)


def _exponent_verdict(name: str, e: float, p: dict[str, Any], metrics: dict[str, Any]) -> CheckResult:
    reasons: list[str] = []
    if not math.isfinite(e):
        return CheckResult(name, CATALOGUE[name].anchor, INCONCLUSIVE, metrics, ["exponent undefined"])
    ok = True
    if "band" in p:
        lo, hi = map(float, p["band"])
        metrics["band"] = [lo, hi]
        if not lo <= e <= hi:
            ok = False
            reasons.append(f"exponent {e:.4f} outside [{lo}, {hi}]")
    if "prediction" in p:
        pred = float(p["prediction"])
        floor = pred - 0.15
        metrics.update(prediction=pred, floor=floor)
        if e < floor:
            ok = False
            reasons.append(f"exponent {e:.4f} below prediction {pred} - 0.15")
    return _result(name, ok, metrics, reasons)


@check("kirchhoff_defect", "vertex-condition:flux-balance", "flux sum vanishes while one-sided derivatives differ", ("graph",))
def _kirch(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.05))
    y = inst.point(p["y"])
    f = inst.kernel(t).values[:, y]
    kd = kirchhoff_defect(inst.graph, inst.op, f, str(p.get("vertex", "center")))
    d = kd.one_sided_derivatives
    gap = max(abs(a - b) for i, a in enumerate(d) for b in d[i + 1 :]) if len(d) > 1 else 0.0
    flux = abs(kd.flux_sum)
    tol = float(p.get("flux_tol", 1e-3))
    factor = float(p.get("gap_factor", 10.0))
    reasons: list[str] = []
    ok = _le(flux, tol, "flux sum", reasons)
    if gap < factor * flux:
        ok = False
        reasons.append(f"derivative gap {gap:.3e} below {factor} x flux {flux:.3e}")
    metrics = {"t": t, "y": p["y"], "vertex": p.get("vertex", "center"), "flux_sum": kd.flux_sum, "derivatives": d, "max_gap": gap}
    return _result("kirchhoff_defect", ok, metrics, reasons)


def _norm(inst: Instance, spec: dict[str, Any]) -> NormSpec:
    kind = spec.get("kind", "lr")
    return NormSpec(kind, float(spec.get("r", 2.0)), inst.op if kind == "graph" else None)


@check("blowup_scan", "regularity:small-time-blow-up", "C(t) scan with fit C1 + C2 t^-p", ("graph", "gasket"))
def _blowup(inst: Instance, p: dict[str, Any]) -> CheckResult:
    pred = p.get("prediction", {})
    cfg = ScanConfig(
        [float(x) for x in p["t_grid"]],
        float(p.get("alpha", 1.0)),
        _norm(inst, p.get("norm", {})),
        Prediction(float(pred.get("exponent", 1.0)), pred.get("power"), str(pred.get("source", ""))),
        p.get("cutoff"),
    )
    rep = scan_constants(inst.kernel, cfg, inst.doc["name"], inst.op)
    d = rep.to_dict()
    c = CATALOGUE["blowup_scan"]
    return CheckResult(c.name, c.anchor, rep.verdict, {k: v for k, v in d.items() if k not in ("verdict", "reasons")}, rep.reasons)


@check("joint_hoelder", "regularity:joint-factorized", "joint seminorm on X x X against M(t) C(t/2)", ("graph", "gasket"))
def _joint(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.2))
    alpha = float(p.get("alpha", 1.0))
    res = joint_scan(inst.kernel(t), alpha, cutoff=p.get("cutoff"))
    reasons: list[str] = []
    ok = bool(res.within_bound)
    if not ok:
        reasons.append(f"joint seminorm {res.estimate.seminorm_at_alpha:.6g} exceeds bound {res.bound:.6g}")
    if "band" in p:
        lo, hi = map(float, p["band"])
        e = res.estimate.fitted_exponent
        if not (math.isfinite(e) and lo <= e <= hi):
            ok = False
            reasons.append(f"joint exponent {e:.4f} outside [{lo}, {hi}]")
    return _result("joint_hoelder", ok, {"t": t, **res.to_dict()}, reasons)


@check("second_order", "regularity:generator-both-coordinates", "joint regularity of A_x A_y p_t with pairing cross-check", ("graph", "gasket"))
def _second(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.3))
    alpha = float(p.get("alpha", 1.0))
    tol = float(p.get("tol", 1e-8))
    res = second_order_scan(inst.kernel(t), inst.op, alpha, cutoff=p.get("cutoff"))
    reasons: list[str] = []
    ok = _le(res.cross_check, tol, "pairing cross-check", reasons)
    if not math.isfinite(res.estimate.seminorm_at_alpha):
        ok = False
        reasons.append("seminorm is not finite")
    if "prediction" in p and math.isfinite(res.estimate.fitted_exponent) and res.estimate.fitted_exponent < float(p["prediction"]) - 0.15:
        ok = False
        reasons.append(f"exponent {res.estimate.fitted_exponent:.4f} below prediction {p['prediction']} - 0.15")
    return _result("second_order", ok, {"t": t, **res.to_dict()}, reasons)


@check("resistance_corners", "gasket:resistance-renormalization", "corner-to-corner resistance 2/3 at every level", ("gasket",))
def _corners(inst: Instance, p: dict[str, Any]) -> CheckResult:
    top = int(p.get("max_level", 6))
    tol = float(p.get("tol", 1e-9))
    worst = 0.0
    per_level = {}
    for m in range(top + 1):
        g = build_gasket(m)[0]
        r = g.resistance_table()
        errs = [abs(r[a, b] - 2 / 3) for a, b in ((0, 1), (0, 2), (1, 2))]
        per_level[str(m)] = max(errs)
        worst = max(worst, max(errs))
    reasons: list[str] = []
    ok = _le(worst, tol, "deviation from 2/3", reasons)
    return _result("resistance_corners", ok, {"max_level": top, "max_deviation": worst, "per_level": per_level, "tol": tol}, reasons)


@check("gasket_exponents", "gasket:resistance-and-euclidean-exponents", "exponents of x -> p_t(x, y0) in both metrics", ("gasket",))
def _gexp(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.1))
    y = inst.point(p.get("y", "v0"))
    g = inst.gasket[0]
    er, ee = resistance_vs_euclidean_scan(g, inst.kernel(t).values[:, y])
    rb = list(map(float, p.get("resistance_band", [0.4, 0.6])))
    eb = list(map(float, p.get("euclidean_band", [0.63, 0.84])))
    reasons = []
    ok = True
    for label, est, band in (("resistance", er, rb), ("euclidean", ee, eb)):
        e = est.fitted_exponent
        if not (math.isfinite(e) and band[0] <= e <= band[1]):
            ok = False
            reasons.append(f"{label} exponent {e:.4f} outside [{band[0]}, {band[1]}]")
    metrics = {
        "t": t,
        "y": p.get("y", "v0"),
        "resistance": {**er.to_dict(), "band": rb},
        "euclidean": {**ee.to_dict(), "band": eb},
    }
    return _result("gasket_exponents", ok, metrics, reasons)


@check("wave_modes", "damped-wave:mode-exponential", "closed-form 2x2 exponentials against the series oracle", ("wave",))
def _wmodes(inst: Instance, p: dict[str, Any]) -> CheckResult:
    lams = p.get("lambdas", [0.5, 1, 10, 100])
    rhos = p.get("rhos", [0.5, 1, 2, 4])
    times = p.get("times", [0.01, 0.1, 1])
    tol = float(p.get("tol", 1e-10))
    worst = 0.0
    for lam in lams:
        for rho in rhos:
            m = mode_matrix(float(lam), float(rho))
            for t in times:
                ref = expm_oracle(m, float(t))
                err = float(np.abs(mode_exponential(m, float(t)) - ref).max() / max(1.0, np.abs(ref).max()))
                worst = max(worst, err)
    reasons: list[str] = []
    ok = _le(worst, tol, "max deviation", reasons)
    return _result("wave_modes", ok, {"max_deviation": worst, "tol": tol, "lattice": [len(lams), len(rhos), len(times)]}, reasons)


@check("wave_symmetry", "damped-wave:similarity-symmetry", "p_t(y,x) = U p_t(x,y)^T U with U = diag(I, -I)", ("wave",))
def _wsym(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t = float(p.get("t", 0.1))
    tol = float(p.get("tol", 1e-9))
    r = block_symmetry_residual(inst.kernel(t))
    reasons: list[str] = []
    return _result("wave_symmetry", _le(r, tol, "residual", reasons), {"t": t, "residual": r, "tol": tol}, reasons)


@check("wave_chapman_kolmogorov", "damped-wave:composition", "block kernel composition law", ("wave",))
def _wck(inst: Instance, p: dict[str, Any]) -> CheckResult:
    t, s = float(p.get("t", 0.1)), float(p.get("s", 0.1))
    tol = float(p.get("tol", 1e-8))
    r = chapman_kolmogorov_residual(inst.kernel(t), inst.kernel(s), inst.kernel(t + s))
    reasons: list[str] = []
    return _result("wave_chapman_kolmogorov", _le(r, tol, "residual", reasons), {"t": t, "s": s, "residual": r, "tol": tol}, reasons)


@check("wave_bound", "damped-wave:smoothing-bound", "C(t) fit in {1/t, 1/t^2}; small-t slope at most 2.2", ("wave",))
def _wbound(inst: Instance, p: dict[str, Any]) -> CheckResult:
    rep = wave_bound_scan(inst.wave, p["t_grid"], p.get("cutoff"), float(p.get("power", 2.0)))
    d = rep.to_dict()
    c = CATALOGUE["wave_bound"]
    return CheckResult(c.name, c.anchor, rep.verdict, {k: v for k, v in d.items() if k not in ("verdict", "reasons")}, rep.reasons)


@check("nonauto_autonomous", "evolution-family:autonomous-reduction", "constant-in-time family against the spectral exponential", ("nonauto",))
def _na_auto(inst: Instance, p: dict[str, Any]) -> CheckResult:
    s, t = float(p.get("s", 0.0)), float(p.get("t", 1.0))
    steps = int(p.get("steps", 256))
    tol = float(p.get("tol", 1e-6))
    fam = inst.family
    const = FormFamily(fam.graph, fam.h, "constant", float(fam.coefficients(s).mean()), potential=fam.potential)
    err = float(np.abs(propagate(const, s, t, steps).matrix - autonomous_reference(const, t - s)).max())
    reasons: list[str] = []
    return _result("nonauto_autonomous", _le(err, tol, "max deviation", reasons), {"s": s, "t": t, "steps": steps, "deviation": err, "tol": tol}, reasons)


@check("nonauto_cocycle", "evolution-family:cocycle", "U(t,s) = U(t,r) U(r,s) at matched step density", ("nonauto",))
def _na_cocycle(inst: Instance, p: dict[str, Any]) -> CheckResult:
    s, r, t = float(p.get("s", 0.0)), float(p.get("r", 0.5)), float(p.get("t", 1.0))
    steps = int(p.get("steps", 256))
    tol = float(p.get("tol", 1e-5))
    res = cocycle_residual(inst.family, s, r, t, steps)
    reasons: list[str] = []
    return _result("nonauto_cocycle", _le(res, tol, "residual", reasons), {"s": s, "r": r, "t": t, "steps": steps, "residual": res, "tol": tol}, reasons)


@check("nonauto_richardson", "evolution-family:second-order-stepping", "error ratio under step doubling near 4", ("nonauto",))
def _na_rich(inst: Instance, p: dict[str, Any]) -> CheckResult:
    s, t = float(p.get("s", 0.0)), float(p.get("t", 1.0))
    steps = int(p.get("steps", 128))
    lo, hi = map(float, p.get("band", [3.5, 4.5]))
    ratio = richardson_ratio(inst.family, s, t, steps)
    reasons = [] if lo <= ratio <= hi else [f"ratio {ratio:.4f} outside [{lo}, {hi}]"]
    return _result("nonauto_richardson", not reasons, {"s": s, "t": t, "steps": steps, "ratio": ratio, "band": [lo, hi]}, reasons)


@check("nonauto_kernel", "evolution-family:kernel-regularity", "one-coordinate and joint Hoelder estimates of p_{t,s}", ("nonauto",))
def _na_kernel(inst: Instance, p: dict[str, Any]) -> CheckResult:
    s, t = float(p.get("s", 0.5)), float(p.get("t", 1.0))
    alpha = float(p.get("alpha", 0.5))
    floor = float(p.get("min_exponent", 0.4))
    res = nonauto_kernel_scan(inst.family, s, t, alpha, int(p.get("steps", 256)))
    reasons = []
    ok = True
    if not math.isfinite(res.joint.seminorm_at_alpha):
        ok = False
        reasons.append("joint seminorm not finite")
    for label, est in (("column", res.column.estimate), ("joint", res.joint)):
        e = est.fitted_exponent
        if not (math.isfinite(e) and e >= floor):
            ok = False
            reasons.append(f"{label} exponent {e:.4f} below {floor}")
    return _result("nonauto_kernel", ok, {**res.to_dict(), "min_exponent": floor}, reasons)


# -- run -------------------------------------------------------------------------


def load_scenario(path: Path) -> dict[str, Any]:
    """Parse and validate a scenario; raises :class:`ScenarioError` with line or field diagnostics."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(x) for x in e.absolute_path) or "<root>"
            lines.append(f"{path}: field {where}: {e.message}")
        raise ScenarioError("\n".join(lines))
    for i, c in enumerate(doc["checks"]):
        if c["name"] not in CATALOGUE:
            raise ScenarioError(f"{path}: field checks/{i}/name: unknown check {c['name']!r}")
        kinds = CATALOGUE[c["name"]].kinds
        if doc["instance"]["kind"] not in kinds:
            raise ScenarioError(f"{path}: field checks/{i}/name: {c['name']} does not apply to {doc['instance']['kind']} instances")
    return doc


def _write_spectrum(inst: Instance, out: Path) -> None:
    lam = inst.spectrum.eigenvalues
    lines = ["index,eigenvalue"] + [f"{i},{float(v)!r}" for i, v in enumerate(lam)]
    (out / "spectrum.csv").write_text("\n".join(lines) + "\n")


def run_scenario(path: Path, out: Path | None = None, quiet: bool = False) -> int:
    started = time.time()
    doc = load_scenario(path)
    inst = Instance(doc, path.parent)
    out = out if out is not None else Path(doc.get("output_dir", f"heatlab_out/{doc['name']}"))
    out.mkdir(parents=True, exist_ok=True)
    _write_spectrum(inst, out)
    if inst.kind != "nonauto":
        for t in doc.get("times", []):
            inst.kernel(t).to_csv(out / f"kernel_t{float(t):g}.csv")
    results: list[CheckResult] = []
    timings = {}
    for c in doc["checks"]:
        t0 = time.time()
        chk = CATALOGUE[c["name"]]
        try:
            res = chk.fn(inst, c.get("params", {}))
        except (FitError, UndefinedSeminormError) as exc:
            res = CheckResult(chk.name, chk.anchor, INCONCLUSIVE, {}, [str(exc)])
        except KeyError as exc:
            raise ScenarioError(f"{path}: check {chk.name}: missing parameter {exc}") from None
        results.append(res)
        timings[chk.name] = round(time.time() - t0, 3)
        if not quiet:
            print(f"{res.verdict.upper():<13} {res.name}" + (f"  ({'; '.join(res.reasons)})" if res.reasons else ""))
    counts = {v: sum(r.verdict == v for r in results) for v in (PASS, FAIL, INCONCLUSIVE)}
    report = {
        "scenario": doc["name"],
        "instance": doc["instance"],
        "mesh": doc.get("mesh", {}),
        "checks": [r.to_dict() for r in results],
        "summary": counts,
    }
    (out / "report.json").write_text(json.dumps(_clean(report), indent=2) + "\n")
    meta = {
        "heatlab_version": __version__,
        "scenario_file": str(path),
        "finished_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "elapsed_s": round(time.time() - started, 3),
        "check_seconds": timings,
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    if counts[FAIL]:
        return EXIT_FAIL
    if counts[INCONCLUSIVE]:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def list_checks() -> str:
    width = max(len(n) for n in CATALOGUE)
    lines = [f"{c.name:<{width}}  [{c.anchor}]  {c.summary}" for c in CATALOGUE.values()]
    return "\n".join(lines)


def export_space(path: Path) -> str:
    doc = load_scenario(path)
    inst = Instance(doc, path.parent)
    s = inst.space
    if inst.kind == "wave":
        s = inst.wave.union
    d = s.to_json_dict()
    if inst.kind == "gasket":
        d.update(inst.gasket[0].export_block())
    return json.dumps(d)


def bundled_scenarios() -> list[Path]:
    return sorted((Path(__file__).parent / "scenarios").glob("*.json"))


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="heatlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"heatlab {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario", type=Path)
    r.add_argument("--out", type=Path, default=None, help="output directory (default: scenario output_dir)")
    r.add_argument("--quiet", action="store_true", help="no per-check lines on stdout")
    sub.add_parser("list-checks", help="print the check catalogue")
    e = sub.add_parser("export-space", help="print the sampled space of a scenario as JSON")
    e.add_argument("scenario", type=Path)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "list-checks":
            print(list_checks())
            return EXIT_OK
        if args.cmd == "export-space":
            print(export_space(args.scenario))
            return EXIT_OK
        return run_scenario(args.scenario, args.out, args.quiet)
    except ScenarioError as exc:
        print(f"scenario error:\n{exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except HeatlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
