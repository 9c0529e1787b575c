"""Classification of the switching line y = 0 and the sliding flow on it."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .model import FilippovModel, _alpha
from .roots import bracketed_roots


class SlidingBoundaryError(ArithmeticError):
    """Sliding velocity requested where g+(x) + g+(-x) vanishes."""


class BoundaryClass(enum.Enum):
    CROSSING_UP = "crossing-up"
    CROSSING_DOWN = "crossing-down"
    SLIDING_STABLE = "sliding-stable"
    SLIDING_UNSTABLE = "sliding-unstable"
    UPPER_FOLD_VISIBLE = "upper-fold-visible"
    UPPER_FOLD_INVISIBLE = "upper-fold-invisible"
    UPPER_CUSP = "upper-cusp"
    LOWER_FOLD_VISIBLE = "lower-fold-visible"
    LOWER_FOLD_INVISIBLE = "lower-fold-invisible"
    LOWER_CUSP = "lower-cusp"
    # visibility of the upper fold first, then of the lower fold
    FOLD_FOLD_VV = "fold-fold-visible-visible"
    FOLD_FOLD_VI = "fold-fold-visible-invisible"
    FOLD_FOLD_IV = "fold-fold-invisible-visible"
    FOLD_FOLD_II = "fold-fold-invisible-invisible"
    BOUNDARY_EQUILIBRIUM = "boundary-equilibrium"
    HIGHER_DEGENERATE = "higher-degenerate"

    @property
    def is_foldfold(self) -> bool:
        return self.name.startswith("FOLD_FOLD")

    @property
    def is_upper_tangency(self) -> bool:
        return self.name.startswith("UPPER_")

    @property
    def is_lower_tangency(self) -> bool:
        return self.name.startswith("LOWER_")

    @property
    def is_tangency(self) -> bool:
        return self.is_upper_tangency or self.is_lower_tangency or self.is_foldfold

    @property
    def is_sliding(self) -> bool:
        return self in (BoundaryClass.SLIDING_STABLE, BoundaryClass.SLIDING_UNSTABLE)

    def mirror(self) -> "BoundaryClass":
        """Class of the reflected point -x."""
        swap = {
            "CROSSING_UP": "CROSSING_DOWN",
            "FOLD_FOLD_VI": "FOLD_FOLD_IV",
        }
        name = self.name
        for a, b in swap.items():
            if name == a:
                return BoundaryClass[b]
            if name == b:
                return BoundaryClass[a]
        if name.startswith("UPPER_"):
            return BoundaryClass["LOWER_" + name[6:]]
        if name.startswith("LOWER_"):
            return BoundaryClass["UPPER_" + name[6:]]
        return self


@dataclass(frozen=True)
class LieData:
    Zph: float
    Zmh: float
    Z2ph: float
    Z2mh: float
    Z3ph: float
    Z3mh: float
    f_plus: float
    f_minus: float


@dataclass(frozen=True)
class BoundaryTolerances:
    tangency: float = 1e-11
    degeneracy: float = 1e-8
    resolution: float = 1e-9
    samples: int = 400


def lie_data(model: FilippovModel, x: float, alpha: Sequence[float]) -> LieData:
    """Lie derivatives of h = y along both fields at (x, 0)."""
    al = _alpha(alpha, model.m)
    k = model.kernel("g", "Lg", "LLg", "f")
    g, lg, llg, f = k(float(x), 0.0, al)
    gm, lgm, llgm, fm = k(-float(x), 0.0, al)
    # Z-^k h (x, y) = -Z+^k h (-x, -y)
    return LieData(g, -gm, lg, -lgm, llg, -llgm, f, -fm)


def classify_point(
    model: FilippovModel, x: float, alpha: Sequence[float], tol: BoundaryTolerances = BoundaryTolerances()
) -> BoundaryClass:
    d = lie_data(model, x, alpha)
    return classify_lie(d, tol)


def classify_lie(d: LieData, tol: BoundaryTolerances = BoundaryTolerances()) -> BoundaryClass:
    B = BoundaryClass
    up = abs(d.Zph) < tol.tangency
    lo = abs(d.Zmh) < tol.tangency
    if not up and not lo:
        if d.Zph > 0 and d.Zmh > 0:
            return B.CROSSING_UP
        if d.Zph < 0 and d.Zmh < 0:
            return B.CROSSING_DOWN
        return B.SLIDING_STABLE if d.Zph < 0 else B.SLIDING_UNSTABLE
    if (up and abs(d.f_plus) < tol.tangency) or (lo and abs(d.f_minus) < tol.tangency):
        return B.BOUNDARY_EQUILIBRIUM
    if up and lo:
        if abs(d.Z2ph) < tol.degeneracy or abs(d.Z2mh) < tol.degeneracy:
            return B.HIGHER_DEGENERATE
        key = ("V" if d.Z2ph > 0 else "I") + ("V" if d.Z2mh < 0 else "I")
        return B["FOLD_FOLD_" + key]
    if up:
        if abs(d.Z2ph) >= tol.degeneracy:
            return B.UPPER_FOLD_VISIBLE if d.Z2ph > 0 else B.UPPER_FOLD_INVISIBLE
        return B.UPPER_CUSP if abs(d.Z3ph) >= tol.degeneracy else B.HIGHER_DEGENERATE
    if abs(d.Z2mh) >= tol.degeneracy:
        return B.LOWER_FOLD_VISIBLE if d.Z2mh < 0 else B.LOWER_FOLD_INVISIBLE
    return B.LOWER_CUSP if abs(d.Z3mh) >= tol.degeneracy else B.HIGHER_DEGENERATE


def sliding_function(model: FilippovModel, x: float, alpha: Sequence[float]) -> float:
    """f^s(x) = g+(x,0) f+(-x,0) - g+(-x,0) f+(x,0)."""
    al = _alpha(alpha, model.m)
    k = model.kernel("f", "g")
    f1, g1 = k(float(x), 0.0, al)
    f2, g2 = k(-float(x), 0.0, al)
    return g1 * f2 - g2 * f1


def sliding_velocity_fn(model: FilippovModel, al: tuple, tol: float = 1e-14):
    k = model.kernel("f", "g")

    def v(x: float) -> float:
        f1, g1 = k(x, 0.0, al)
        f2, g2 = k(-x, 0.0, al)
        den = g1 + g2
        if abs(den) < tol:
            raise SlidingBoundaryError(f"g+(x)+g+(-x) vanishes at x={x}")
        return -(g1 * f2 - g2 * f1) / den

    return v


def sliding_velocity(model: FilippovModel, x: float, alpha: Sequence[float], tol: float = 1e-14) -> float:
    """Speed of the sliding flow along y = 0 at (x, 0)."""
    return sliding_velocity_fn(model, _alpha(alpha, model.m), tol)(float(x))


# ------------------------------------------------------------------ portrait


@dataclass
class TangentPoint:
    x: float
    cls: BoundaryClass
    lie: LieData


@dataclass
class Segment:
    x_lo: float
    x_hi: float
    cls: BoundaryClass
    # sign of the sliding velocity at the midpoint (0 for crossing segments)
    orientation: int = 0


@dataclass
class PseudoEquilibrium:
    x: float
    kind: str


@dataclass
class BoundaryPortrait:
    interval: tuple[float, float]
    tangent_points: list[TangentPoint] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list)
    pseudo_equilibria: list[PseudoEquilibrium] = field(default_factory=list)
    unresolved: list[float] = field(default_factory=list)

    def sliding_segments(self) -> list[Segment]:
        return [s for s in self.segments if s.cls.is_sliding]

    def to_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "tangent_points": [
                {"x": t.x, "class": t.cls.value, "lie_data": asdict(t.lie)} for t in self.tangent_points
            ],
            "segments": [
                {"x_lo": s.x_lo, "x_hi": s.x_hi, "class": s.cls.value, "orientation": s.orientation}
                for s in self.segments
            ],
            "pseudo_equilibria": [{"x": p.x, "type": p.kind} for p in self.pseudo_equilibria],
            "unresolved": list(self.unresolved),
        }


def _touch_roots(fn, dfn, lo, hi, n, tol) -> list[float]:
    """Double roots where fn touches zero without changing sign."""
    out = []
    for c in bracketed_roots(dfn, lo, hi, n):
        if abs(fn(c)) < tol:
            out.append(c)
    return out


def boundary_portrait(
    model: FilippovModel,
    interval: tuple[float, float],
    alpha: Sequence[float],
    tol: BoundaryTolerances = BoundaryTolerances(),
) -> BoundaryPortrait:
    al = _alpha(alpha, model.m)
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError("interval must satisfy lo < hi")
    k = model.kernel("g", "g_x")
    up = lambda x: k(x, 0.0, al)[0]  # noqa: E731
    upx = lambda x: k(x, 0.0, al)[1]  # noqa: E731
    dn = lambda x: k(-x, 0.0, al)[0]  # noqa: E731
    dnx = lambda x: -k(-x, 0.0, al)[1]  # noqa: E731
    n = tol.samples
    cand = bracketed_roots(up, lo, hi, n) + _touch_roots(up, upx, lo, hi, n, tol.tangency)
    cand += bracketed_roots(dn, lo, hi, n) + _touch_roots(dn, dnx, lo, hi, n, tol.tangency)
    cand.sort()
    merged: list[float] = []
    portrait = BoundaryPortrait((lo, hi))
    for c in cand:
        if merged and abs(c - merged[-1]) <= tol.resolution:
            # an upper and a lower tangency at the same place: fold-fold
            continue
        if merged and abs(c - merged[-1]) <= 1e3 * tol.resolution:
            portrait.unresolved.append(c)
        merged.append(c)
    for c in merged:
        d = lie_data(model, c, al)
        # a merged pair may leave one residual just above the tangency tolerance
        loose = BoundaryTolerances(max(tol.tangency, 1e-9), tol.degeneracy, tol.resolution, tol.samples)
        portrait.tangent_points.append(TangentPoint(c, classify_lie(d, loose), d))
    edges = [lo] + merged + [hi]
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        cls = classify_point(model, mid, al, tol)
        orient = 0
        if cls.is_sliding:
            orient = int(np.sign(sliding_velocity_fn(model, al)(mid)))
        portrait.segments.append(Segment(a, b, cls, orient))
    fs = lambda x: sliding_function(model, x, al)  # noqa: E731
    for s in portrait.sliding_segments():
        width = s.x_hi - s.x_lo
        pad = 1e-12 * max(1.0, abs(s.x_lo), abs(s.x_hi))
        if width <= 2 * pad:
            continue
        for r in bracketed_roots(fs, s.x_lo + pad, s.x_hi - pad, 64):
            h = 1e-6 * max(width, 1e-6)
            dfs = (fs(r + h) - fs(r - h)) / (2 * h)
            den = up(r) + dn(r)
            dv = -dfs / den
            stable = s.cls is BoundaryClass.SLIDING_STABLE
            if (dv > 0) == stable:
                kind = "pseudo-saddle"
            else:
                kind = "pseudo-node-stable" if stable else "pseudo-node-unstable"
            portrait.pseudo_equilibria.append(PseudoEquilibrium(r, kind))
    return portrait


def fold_root(model: FilippovModel, center: float, half_width: float, alpha: Sequence[float]) -> float:
    """Root of g+(x, 0; alpha) closest to ``center``."""
    from .roots import root_near

    al = _alpha(alpha, model.m)
    g = model.kernel("g")
    return root_near(lambda x: g(x, 0.0, al)[0], center, half_width)
