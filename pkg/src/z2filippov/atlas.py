"""Parameter sweeps, bifurcation curves and their asymptotic fits.

Two-parameter diagrams are addressed in measured unfolding coordinates
beta = (beta1, beta2).  A column of the grid is a ray of constant beta1:
beta1 depends only on the tangency geometry, which is cheap, so the ray is
parametrized exactly by a second parameter t and beta2 is reached by secant
continuation down the column.  Curve points are zeros of the exact event
functions along such rays.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import maps
from .coeffs import UnfoldingError, coefficient_report, cusp_geometry, measured_unfolding
from .cycles import (
    DEFAULT_CYCLE_CONFIG,
    CycleConfig,
    RegionLabel,
    classify_dynamics,
    foldfold_geometry,
)
from .model import FilippovModel
from .roots import RootError, secant

SCHEMA_VERSION = 1

CURVES = {
    "codim1": ("CC",),
    "cusp": ("CS", "SS", "GS"),
    "foldfold": ("CS+", "SH+", "TC+", "TC-", "SH-", "CS-", "F0", "AX"),
}

# leading constants of the cusp curves as stated for Lemma 6.2
CUSP_CONSTANTS = {"CS": -1.0, "SS": 1.0, "GS": 3.0}
FOLDFOLD_KEYS = {"CS+": "vartheta4", "SH+": "vartheta6", "TC+": "vartheta5", "TC-": "vartheta5",
                 "SH-": "vartheta7", "CS-": "vartheta3"}

_NUMERICAL = (maps.MapDomainError, RootError, UnfoldingError, ArithmeticError, ValueError)


# ------------------------------------------------------------------- grids


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    n: int

    @classmethod
    def parse(cls, text: str) -> "Axis":
        lo, hi, n = text.split(":")
        return cls(float(lo), float(hi), int(n))

    def values(self) -> np.ndarray:
        if self.n == 1:
            return np.array([self.lo])
        v = np.linspace(self.lo, self.hi, self.n)
        # linspace leaves roundoff where the axis crosses zero
        v[np.abs(v) < 1e-12 * (self.hi - self.lo)] = 0.0
        return v

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.n - 1) if self.n > 1 else 0.0


@dataclass(frozen=True)
class GridSpec:
    coords: str  # "alpha" or "beta"
    b1: Axis
    b2: Axis
    scan: int = 12  # samples per ray when bracketing curve events

    def to_dict(self) -> dict:
        return {"coords": self.coords, "b1": asdict(self.b1), "b2": asdict(self.b2), "scan": self.scan}


def default_grid(case: str, n: int = 101) -> GridSpec:
    """Grids scaled to the curve geometry of each case."""
    if case == "codim1":
        return GridSpec("alpha", Axis(-1e-2, 1e-2, n), Axis(0.0, 0.0, 1))
    if case == "cusp":
        # curves are beta2 ~ C sqrt(beta1): a square box would hide them
        return GridSpec("beta", Axis(-5e-5, 5e-5, n), Axis(-2e-2, 2e-2, n))
    return GridSpec("beta", Axis(-1e-3, 1e-3, n), Axis(-5e-7, 2e-6, n))


# ------------------------------------------------------------- coordinates


class Unfolding:
    """Measured coordinates and the ray parametrization alpha(beta1, t).

    With u, v the columns of the inverse linearization at alpha = 0,
    alpha = s u + t v and s is solved so that beta1(alpha) is exact.
    """

    def __init__(self, model: FilippovModel, case: str, cfg: CycleConfig = DEFAULT_CYCLE_CONFIG,
                 h: float = 1e-6):
        if model.m != 2:
            raise ValueError("two-parameter unfoldings need m = 2")
        self.model, self.case, self.cfg = model, case, cfg
        jac = np.zeros((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            bp = np.array(self.beta(e))
            bm = np.array(self.beta(-e))
            jac[:, j] = (bp - bm) / (2 * h)
        self.jac = jac
        inv = np.linalg.inv(jac)
        self.u, self.v = inv[:, 0], inv[:, 1]

    def beta1(self, al) -> float:
        al = tuple(float(a) for a in al)
        if self.case == "cusp":
            return cusp_geometry(self.model, al)[0]
        if self.case == "foldfold":
            return foldfold_geometry(self.model, al)["phi1"]
        return measured_unfolding(self.model, self.case, al, self.cfg.maps).rho1

    def beta(self, al) -> tuple[float, float]:
        al = tuple(float(a) for a in al)
        return measured_unfolding(self.model, self.case, al, self.cfg.maps).beta()

    def beta2(self, al) -> float:
        return self.beta(al)[1]

    def alpha_on_ray(self, beta1: float, t: float) -> tuple[float, float]:
        f = lambda s: self.beta1(s * self.u + t * self.v) - beta1  # noqa: E731
        s0 = beta1 - (self.jac[0] @ (t * self.v))
        s = secant(f, s0, s0 + 1e-3 * max(abs(s0), 1e-9), tol=1e-15, maxiter=30)
        al = s * self.u + t * self.v
        return (float(al[0]), float(al[1]))

    def address(self, beta1: float, beta2: float, t0: float | None = None,
                tol: float = 1e-9) -> tuple[tuple[float, float], float, tuple[float, float]]:
        """(alpha, t, measured beta) for a target point, by secant in t."""
        t0 = beta2 if t0 is None else t0
        cache = {}

        def resid(t):
            al = self.alpha_on_ray(beta1, t)
            b = self.beta(al)
            cache[t] = (al, b)
            return b[1] - beta2

        # Newton-like steps with the slope dbeta2/dt refreshed by secant; the
        # map is close to the identity so two evaluations usually suffice.
        atol = max(tol * max(abs(beta2), abs(beta1)), 1e-13)
        t, r = t0, resid(t0)
        slope = 1.0
        for _ in range(20):
            if abs(r) <= atol:
                break
            tn = t - r / slope
            rn = resid(tn)
            if rn != r and tn != t:
                slope = (rn - r) / (tn - t)
            t, r = tn, rn
        else:
            raise RootError("addressing along the ray did not converge")
        al, b = cache[t]
        return al, t, b


# ------------------------------------------------------------- ray events


def ray_events(model: FilippovModel, case: str, al: tuple, cfg: CycleConfig = DEFAULT_CYCLE_CONFIG) -> dict:
    """Exact event functions whose zeros are the bifurcation curves."""
    mc = cfg.maps
    if case == "cusp":
        phi1, xi1, roots, _ = cusp_geometry(model, al)
        if len(roots) != 2:
            return {}
        t_iv, t_v = roots
        s = maps.sigma_full(model, t_v, al, mc)
        varsigma = -maps.backward_fold_map(model, t_v, al, mc)
        cs = s + t_v
        return {"CS": cs, "SS": cs - (t_v - t_iv), "GS": s - varsigma}
    if case == "foldfold":
        geo = foldfold_geometry(model, al)
        v1m, v1p, phi1 = geo["vartheta1_minus"], geo["vartheta1_plus"], geo["phi1"]
        sp = lambda x: maps.sigma_half(model, "plus", x, al, mc)  # noqa: E731
        sm = lambda x: maps.sigma_half(model, "minus", x, al, mc)  # noqa: E731
        w = geo.get("varpi")
        if phi1 > 0:
            s_um = sp(-v1m)
            out = {"CS+": s_um - sm(v1m), "TC+": s_um - sm(v1p)}
            if w is not None:
                out["SH+"] = s_um - sm(w)
            return out
        if phi1 < 0:
            s_lp = sm(v1p)
            out = {"CS-": sp(-v1p) - s_lp, "TC-": sp(-v1m) - s_lp}
            if w is not None:
                out["SH-"] = sp(-w) - s_lp
            return out
        return {}
    raise ValueError(f"no ray events for case {case!r}")


@dataclass
class CurvePoint:
    beta1: float
    beta2: float
    alpha: tuple[float, float]
    t: float


@dataclass
class RayResult:
    beta1: float
    points: dict[str, CurvePoint] = field(default_factory=dict)
    # curves without a zero on the ray: +1 if the event is positive throughout
    signs: dict[str, int] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)


def trace_ray(unf: Unfolding, beta1: float, t_lo: float, t_hi: float, n: int = 12,
              xtol: float = 1e-14) -> RayResult:
    """Zeros of every event function along the ray of constant beta1."""
    model, case, cfg = unf.model, unf.case, unf.cfg
    res = RayResult(beta1)
    ts = np.linspace(t_lo, t_hi, n)
    samples = []
    for t in ts:
        try:
            samples.append(ray_events(model, case, unf.alpha_on_ray(beta1, float(t)), cfg))
        except _NUMERICAL as exc:
            samples.append({})
            res.failures.append(f"t={t:.6g}: {type(exc).__name__}")
    names = sorted({k for s in samples for k in s})
    for name in names:
        vals = [(float(t), s.get(name)) for t, s in zip(ts, samples)]
        vals = [(t, v) for t, v in vals if v is not None]
        root = None
        for (ta, va), (tb, vb) in zip(vals[:-1], vals[1:]):
            if va == 0.0:
                root = ta
                break
            if va * vb < 0:

                def fn(t, name=name):
                    ev = ray_events(model, case, unf.alpha_on_ray(beta1, t), cfg)
                    return ev[name]

                try:
                    root = brentq(fn, ta, tb, xtol=xtol, rtol=1e-15)
                except _NUMERICAL + (KeyError,) as exc:
                    res.failures.append(f"{name}: {type(exc).__name__}")
                break
        if root is None:
            if vals:
                res.signs[name] = 1 if all(v > 0 for _, v in vals) else (-1 if all(v < 0 for _, v in vals) else 0)
            continue
        al = unf.alpha_on_ray(beta1, root)
        try:
            b2 = unf.beta2(al)
        except _NUMERICAL as exc:
            res.failures.append(f"{name} beta2: {type(exc).__name__}")
            continue
        res.points[name] = CurvePoint(beta1, b2, al, root)
    if case == "foldfold" and beta1 > 0:
        try:
            al, t, b = unf.address(beta1, 0.0, t0=0.5 * (t_lo + t_hi))
            res.points["F0"] = CurvePoint(beta1, b[1], al, t)
        except _NUMERICAL as exc:
            res.failures.append(f"F0: {type(exc).__name__}")
    return res


def extract_curves(model: FilippovModel, case: str, rays: Sequence[float], beta2_range: tuple[float, float],
                   cfg: CycleConfig = DEFAULT_CYCLE_CONFIG, n: int = 12, unf: Unfolding | None = None,
                   scale: str = "auto") -> dict[str, list[CurvePoint]]:
    """Curve point sets from rays of constant beta1.

    ``beta2_range`` is the search window in beta2; with ``scale="auto"`` it is
    multiplied by sqrt|beta1| (cusp) or beta1**2 (fold-fold) on each ray so a
    single range follows the curves toward the origin.
    """
    unf = Unfolding(model, case, cfg) if unf is None else unf
    out: dict[str, list[CurvePoint]] = {k: [] for k in CURVES[case]}
    for b1 in rays:
        lo, hi = beta2_range
        if scale == "auto":
            f = math.sqrt(abs(b1)) if case == "cusp" else b1 * b1
            lo, hi = lo * f, hi * f
        try:
            _, t_lo, _ = unf.address(b1, lo)
            _, t_hi, _ = unf.address(b1, hi)
        except _NUMERICAL:
            continue
        r = trace_ray(unf, b1, t_lo, t_hi, n)
        for k, p in r.points.items():
            out.setdefault(k, []).append(p)
    if case == "foldfold":
        out["AX"] = [CurvePoint(0.0, 0.0, (0.0, 0.0), 0.0)]
    for k in out:
        out[k].sort(key=lambda p: (p.beta1, p.beta2))
    return out


# ------------------------------------------------------------ predictions


def _label(n=0, stab=(), sliding="none", arrival=None, critical="none", conns=(), enclosure=None) -> RegionLabel:
    return RegionLabel(n_crossing=n, stabilities=list(stab), sliding=sliding, sliding_arrival=arrival,
                       critical=critical, connections=list(conns), enclosure=enclosure)


def predicted_label(case: str, beta1: float, beta2: float, curves: dict[str, float],
                    zero_tol: float = 1e-10) -> RegionLabel | None:
    """Region of the lemma tables from curve positions on the cell's ray.

    ``curves`` maps curve names to their beta2 position on the ray, with
    +-inf standing for a curve that lies beyond the searched window.
    Returns None for cells on a curve.
    """
    def on(c):
        return abs(beta2 - c) <= zero_tol * max(1.0, abs(c))

    if case == "codim1":
        if abs(beta1) <= zero_tol:
            return _label(critical="through-fold:internally-stable")
        if beta1 < 0:
            return _label(1, ["stable"], enclosure="no-enclosure")
        return _label(sliding="stable", arrival="slides-on-S1")
    if case == "cusp":
        if beta1 < -zero_tol:
            return _label(1, ["stable"], enclosure="no-enclosure")
        if abs(beta1) <= zero_tol:
            if abs(beta2) <= zero_tol:
                return _label(critical="through-cusp:stable")
            return _label(1, ["stable"], enclosure="encloses-T_c" if beta2 > 0 else "no-enclosure")
        cs, ss, gs = curves.get("CS"), curves.get("SS"), curves.get("GS")
        if cs is None or ss is None or gs is None or any(on(c) for c in (cs, ss, gs)):
            return None
        if beta2 < cs:
            return _label(1, ["stable"], enclosure="no-enclosure")
        if beta2 < ss:
            return _label(sliding="stable", arrival="from-Sigma+")
        if beta2 < gs:
            return _label(sliding="stable", arrival="from-Sigma-")
        return _label(1, ["stable"], enclosure="encloses-T_iv+T_v")
    if case == "foldfold":
        if abs(beta1) <= zero_tol:
            return None
        if beta1 > 0:
            c = [curves.get(k) for k in ("CS+", "SH+", "TC+")]
            if any(x is None for x in c) or any(on(x) for x in c + [0.0]):
                return None
            cs, sh, tc = c
            if beta2 < 0:
                return _label()
            if beta2 < cs:
                return _label(2, ["stable", "unstable"], enclosure="no-enclosure")
            one = dict(n=1, stab=["unstable"], enclosure="no-enclosure")
            if beta2 < sh:
                return _label(**one, sliding="stable", arrival="slides-on-S3",
                              conns=["tangent-tangent-sliding:T_u-->T_l+"])
            if beta2 < tc:
                return _label(**one, conns=["tangent-tangent-sliding:T_u-->T_u+"])
            return _label(**one)
        c = [curves.get(k) for k in ("TC-", "SH-", "CS-")]
        if any(x is None for x in c) or any(on(x) for x in c):
            return None
        tc, sh, cs = c
        if beta2 < tc:
            return _label()
        if beta2 < sh:
            return _label(conns=["tangent-tangent-sliding:T_u-->T_u+"])
        if beta2 < cs:
            return _label(sliding="unstable", arrival="slides-on-S3",
                          conns=["tangent-tangent-sliding:T_l-->T_u+"])
        return _label(1, ["unstable"], enclosure="no-enclosure")
    raise ValueError(case)


# ------------------------------------------------------------------ sweeps


@dataclass
class Cell:
    i: int
    j: int
    target: tuple[float, float]
    alpha: tuple[float, float] | None
    beta: tuple[float, float] | None
    label: RegionLabel | None
    predicted: RegionLabel | None
    resolved: bool

    def to_dict(self) -> dict:
        return {
            "i": self.i, "j": self.j, "target": list(self.target),
            "alpha": None if self.alpha is None else list(self.alpha),
            "beta": None if self.beta is None else list(self.beta),
            "label": None if self.label is None else self.label.to_dict(),
            "predicted": None if self.predicted is None else self.predicted.to_dict(),
            "resolved": self.resolved,
        }


@dataclass
class Diagram:
    case: str
    grid: GridSpec
    cells: list[Cell] = field(default_factory=list)
    curves: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def cell(self, i: int, j: int) -> Cell:
        return self.cells[i * self.grid.b2.n + j]

    def resolved_cells(self) -> list[Cell]:
        return [c for c in self.cells if c.resolved]

    def misclassified(self) -> list[Cell]:
        """Resolved cells whose label disagrees with the lemma prediction."""
        return [c for c in self.cells if c.resolved and c.predicted is not None
                and c.label.key() != c.predicted.key()]

    def region_keys(self) -> set:
        return {c.label.key() for c in self.cells if c.resolved}

    def coverage_violations(self, widths: float = 2.0) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Adjacent resolved cells with different labels and no curve between them."""
        g = self.grid
        d1, d2 = g.b1.step, g.b2.step
        pts = [p for k, v in self.curves.items() for p in v]
        arr = np.array(pts) if pts else np.zeros((0, 2))
        bad = []

        def near(c0: Cell, c1: Cell) -> bool:
            lo = np.minimum(c0.target, c1.target) - widths * np.array([d1, d2])
            hi = np.maximum(c0.target, c1.target) + widths * np.array([d1, d2])
            if len(arr) and np.any(np.all((arr >= lo) & (arr <= hi), axis=1)):
                return True
            # a curve leaving the column between the two rows of a neighbor
            return (c0.target[0] <= 0 <= c1.target[0]) or (c1.target[0] <= 0 <= c0.target[0])

        for c in self.cells:
            if not c.resolved:
                continue
            for di, dj in ((1, 0), (0, 1)):
                ii, jj = c.i + di, c.j + dj
                if ii >= g.b1.n or jj >= g.b2.n:
                    continue
                o = self.cell(ii, jj)
                if o.resolved and o.label.key() != c.label.key() and not near(c, o):
                    bad.append(((c.i, c.j), (ii, jj)))
        return bad

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "case": self.case,
            "grid": self.grid.to_dict(),
            "provenance": dict(sorted(self.provenance.items())),
            "cells": [c.to_dict() for c in sorted(self.cells, key=lambda c: (c.i, c.j))],
            "curves": {k: [list(p) for p in sorted(v)] for k, v in sorted(self.curves.items())},
        }


def _curve_positions(ray: RayResult, names: Sequence[str]) -> dict[str, float]:
    out = {}
    for k in names:
        if k in ray.points:
            out[k] = ray.points[k].beta2
        elif ray.signs.get(k) == 1:
            out[k] = -math.inf  # event positive on the whole ray: curve below it
        elif ray.signs.get(k) == -1:
            out[k] = math.inf
    return out


def _column(args) -> tuple[list[Cell], RayResult | None]:
    unf, i, b1, b2s, grid = args
    case, model, cfg = unf.case, unf.model, unf.cfg
    cells: list[Cell] = []
    ray = None
    if case == "codim1":
        for j, b2 in enumerate(b2s):
            al = (float(b1), float(b2))
            try:
                lab = classify_dynamics(model, case, al, cfg)
                rho = measured_unfolding(model, case, al, cfg.maps).rho1
                pred = predicted_label(case, rho, 0.0, {}, cfg.zero_tol)
                cells.append(Cell(i, j, al, al, (rho, 0.0), lab, pred, not lab.partial))
            except _NUMERICAL:
                cells.append(Cell(i, j, al, al, None, None, None, False))
        return cells, None
    t = None
    addressed = []
    for j, b2 in enumerate(b2s):
        # continue from the previous row, shifted by the target step
        t0 = None if t is None else t + (float(b2) - prev_b2)
        try:
            al, t, beta = unf.address(float(b1), float(b2), t0=t0)
            addressed.append((j, b2, al, t, beta))
            prev_b2 = beta[1]
        except _NUMERICAL:
            addressed.append((j, b2, None, None, None))
            t = None
    ts = [a[3] for a in addressed if a[3] is not None]
    positions: dict[str, float] = {}
    if ts and not (case == "cusp" and b1 <= 0):
        ray = trace_ray(unf, float(b1), min(ts), max(ts), grid.scan)
        positions = _curve_positions(ray, [k for k in CURVES[case] if k not in ("F0", "AX")])
    for j, b2, al, t, beta in addressed:
        if al is None:
            cells.append(Cell(i, j, (float(b1), float(b2)), None, None, None, None, False))
            continue
        lab = classify_dynamics(model, case, al, cfg)
        pred = predicted_label(case, beta[0], beta[1], positions, cfg.zero_tol)
        cells.append(Cell(i, j, (float(b1), float(b2)), al, beta, lab, pred, not lab.partial))
    return cells, ray


def run_sweep(model: FilippovModel, case: str, grid: GridSpec | None = None, threads: int = 1,
              cfg: CycleConfig = DEFAULT_CYCLE_CONFIG, progress: Callable[[int, int], None] | None = None) -> Diagram:
    """Classify every cell of the grid; columns are independent work items."""
    grid = default_grid(case) if grid is None else grid
    if case == "codim1":
        unf = _Codim1Unfolding(model, cfg)
    else:
        if grid.coords != "beta":
            raise ValueError("two-parameter sweeps are addressed in measured coordinates")
        unf = Unfolding(model, case, cfg)
    b2s = grid.b2.values()
    jobs = [(unf, i, float(b1), b2s, grid) for i, b1 in enumerate(grid.b1.values())]
    results = []
    if threads <= 1:
        for k, job in enumerate(jobs):
            results.append(_column(job))
            if progress:
                progress(k + 1, len(jobs))
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            for k, r in enumerate(ex.map(_column, jobs)):
                results.append(r)
                if progress:
                    progress(k + 1, len(jobs))
    dia = Diagram(case, grid)
    curves: dict[str, list[tuple[float, float]]] = {k: [] for k in CURVES[case]}
    for cells, ray in results:
        dia.cells.extend(cells)
        if ray is not None:
            for k, p in ray.points.items():
                curves[k].append((p.beta1, p.beta2))
    if case == "codim1":
        curves["CC"] = _codim1_root(model, grid, cfg)
    elif case == "foldfold":
        curves["AX"] = [(0.0, float(b2)) for b2 in b2s]
    dia.cells.sort(key=lambda c: (c.i, c.j))
    dia.curves = {k: sorted(v) for k, v in curves.items()}
    dia.provenance = {
        "model": model.fingerprint(),
        "label": model.label,
        "zero_tol": cfg.zero_tol,
        "double_tol": cfg.double_tol,
        "map_rtol": cfg.maps.opts.rtol,
        "map_atol": cfg.maps.opts.atol,
        "seed": 0,
    }
    return dia


class _Codim1Unfolding:
    def __init__(self, model, cfg):
        self.model, self.case, self.cfg = model, "codim1", cfg


def _codim1_root(model, grid, cfg) -> list[tuple[float, float]]:
    """The alpha1 where rho1 vanishes on the swept segment."""
    b2 = float(grid.b2.lo)
    fn = lambda a1: measured_unfolding(model, "codim1", (a1, b2), cfg.maps).rho1  # noqa: E731
    lo, hi = grid.b1.lo, grid.b1.hi
    try:
        r = brentq(fn, lo, hi, xtol=1e-15, rtol=1e-15)
    except _NUMERICAL:
        return []
    return [(float(r), b2)]


# -------------------------------------------------------------------- fits


@dataclass
class CurveFit:
    name: str
    form: str  # "sqrt" or "square"
    C: float
    C_err: float
    predicted: float | None
    exponent: float
    exponent_err: float
    intercept: float  # limit from the two-term fit C + D*w
    n_points: int
    cutoff: float
    residual: float

    def rel_error(self) -> float | None:
        if self.predicted in (None, 0):
            return None
        return abs(self.C - self.predicted) / abs(self.predicted)

    def to_dict(self) -> dict:
        return asdict(self)


class FitError(ValueError):
    pass


def fit_asymptotics(points: Sequence[tuple[float, float]], form: str, name: str = "",
                    cutoff: float = math.inf, predicted: float | None = None, min_points: int = 8) -> CurveFit:
    """Fit beta2 = C * w(beta1) with w = sqrt|beta1| or beta1**2.

    Only points with max(|beta1|, |beta2|) <= cutoff are used, so one cutoff
    means the same distance from the origin for square-root and quadratic
    curves.  The exponent is the slope of log|beta2| against log|beta1|.
    """
    pts = np.array([p for p in points if 0 < abs(p[0]) and p[1] != 0 and max(abs(p[0]), abs(p[1])) <= cutoff],
                   float).reshape(-1, 2)
    if len(pts) < min_points:
        raise FitError(f"{name}: {len(pts)} points below cutoff {cutoff}, need {min_points}")
    b1, b2 = np.abs(pts[:, 0]), pts[:, 1]
    if form == "sqrt":
        w = np.sqrt(b1)
    elif form == "square":
        w = b1 ** 2
    else:
        raise ValueError("form must be 'sqrt' or 'square'")
    C = float(w @ b2 / (w @ w))
    res = b2 - C * w
    dof = max(len(w) - 1, 1)
    C_err = float(math.sqrt(res @ res / dof / (w @ w)))
    A = np.vstack([np.ones_like(w), np.sqrt(b1) if form == "sqrt" else b1]).T
    ratio = b2 / w
    coef, *_ = np.linalg.lstsq(A, ratio, rcond=None)
    X = np.vstack([np.ones_like(b1), np.log(b1)]).T
    if np.linalg.cond(X) > 1e12:
        raise FitError(f"{name}: ill-conditioned exponent fit")
    (c0, slope), *_ = np.linalg.lstsq(X, np.log(np.abs(b2)), rcond=None)
    lres = np.log(np.abs(b2)) - X @ np.array([c0, slope])
    s_err = float(math.sqrt((lres @ lres) / max(len(b1) - 2, 1) / np.sum((np.log(b1) - np.log(b1).mean()) ** 2)))
    return CurveFit(name, form, C, C_err, predicted, float(slope), s_err, float(coef[0]), len(w),
                    float(cutoff), float(math.sqrt(res @ res / len(w))))


def predicted_constants(model: FilippovModel, case: str) -> dict[str, float]:
    if case == "cusp":
        return dict(CUSP_CONSTANTS)
    if case == "foldfold":
        th = coefficient_report(model, case).vartheta_leading
        return {k: th[v] for k, v in FOLDFOLD_KEYS.items()}
    return {}


def fit_curves(model: FilippovModel, case: str, curves: dict[str, list[CurvePoint]],
               cutoffs: Sequence[float] = (1e-2, 5e-3, 2.5e-3)) -> dict[str, list[CurveFit]]:
    form = "sqrt" if case == "cusp" else "square"
    pred = predicted_constants(model, case)
    out = {}
    for name, pts in sorted(curves.items()):
        if name not in pred:
            continue
        xy = [(p.beta1, p.beta2) for p in pts]
        fits = []
        for c in cutoffs:
            try:
                fits.append(fit_asymptotics(xy, form, name, c, pred[name]))
            except FitError:
                pass
        out[name] = fits
    return out


def default_rays(case: str, count: int | None = None, top: float | None = None) -> list[float]:
    """Geometric sequence of beta1 values toward the origin (both signs for fold-fold)."""
    top = (1e-4 if case == "cusp" else 1e-2) if top is None else top
    count = (17 if case == "cusp" else 12) if count is None else count
    pos = [top * 0.5 ** k for k in range(count)]
    if case == "foldfold":
        return sorted([-p for p in pos] + pos)
    return sorted(pos)


DEFAULT_RAY_WINDOW = {"cusp": (-2.0, 4.0), "foldfold": (-0.5, 2.0)}


# -------------------------------------------------------------------- emit


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, RegionLabel):
        return o.to_dict()
    raise TypeError(type(o).__name__)


def emit(obj, fmt: str, path: str | os.PathLike | None = None) -> str:
    """Serialize a Diagram, a fit table or a curve dict; write it when a path is given."""
    if fmt == "json":
        if isinstance(obj, Diagram):
            payload = obj.to_dict()
        elif isinstance(obj, dict):
            payload = {"schema_version": SCHEMA_VERSION, **_plain(obj)}
        else:
            raise TypeError(f"cannot emit {type(obj).__name__}")
        text = json.dumps(payload, sort_keys=True, indent=1, default=_json_default) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if isinstance(obj, Diagram):
            w.writerow(["i", "j", "target1", "target2", "alpha1", "alpha2", "beta1", "beta2",
                        "label", "predicted", "resolved"])
            for c in sorted(obj.cells, key=lambda c: (c.i, c.j)):
                al = c.alpha or (math.nan, math.nan)
                be = c.beta or (math.nan, math.nan)
                w.writerow([c.i, c.j, repr(c.target[0]), repr(c.target[1]), repr(al[0]), repr(al[1]),
                            repr(be[0]), repr(be[1]), c.label.name() if c.label else "",
                            c.predicted.name() if c.predicted else "", int(c.resolved)])
        elif isinstance(obj, dict):
            w.writerow(["curve", "beta1", "beta2"])
            for name, pts in sorted(obj.items()):
                for p in pts:
                    b = (p.beta1, p.beta2) if isinstance(p, CurvePoint) else tuple(p)
                    w.writerow([name, repr(b[0]), repr(b[1])])
        else:
            raise TypeError(f"cannot emit {type(obj).__name__}")
        text = buf.getvalue()
    else:
        raise ValueError("format must be json or csv")
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, (CurvePoint, CurveFit)):
        return _plain(asdict(o))
    if isinstance(o, RegionLabel):
        return o.to_dict()
    if isinstance(o, np.generic):
        return o.item()
    return o
