"""Periodic orbits and connections near the critical crossing cycle.

Crossing cycles are symmetric zeros of T1 (fold and cusp cases) or T2
(fold-fold case) inside the admissible part of the map window.  Sliding
cycles are built by shooting the upper orbit out of the visible fold and
checking where it lands on the mirrored sliding segment; by Z2 symmetry the
other half of the orbit is the reflection, so a symmetric landing closes it.

Every inventory assumes f+(-a, 0; 0) > 0, the orientation used throughout
the lemma tables.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

from . import maps
from .boundary import sliding_velocity
from .coeffs import UnfoldingError, cusp_geometry, upper_fold, varpi
from .model import CASES, FilippovModel, _alpha
from .roots import RootError, newton_from


class UnsupportedGeometry(ValueError):
    """The model orientation is outside what the inventories cover."""


@dataclass(frozen=True)
class CycleConfig:
    zero_tol: float = 1e-10  # gap values treated as exact zeros
    double_tol: float = 1e-4  # |T'| below this at a root: fold of cycles
    maps: maps.MapConfig = maps.DEFAULT_CONFIG
    derivative: str = "analytic"  # or "fd" for centered differences of R


DEFAULT_CYCLE_CONFIG = CycleConfig()


@dataclass
class CycleRecord:
    kind: str  # crossing | sliding | critical-crossing
    subkind: str
    sigma_points: tuple[float, ...]  # sorted, symmetric about 0
    derivative: float | None
    stability: str  # stable | unstable | internally-stable | ... | double
    encloses: tuple[str, ...] = ()
    alpha: tuple[float, ...] = ()

    def symmetry_defect(self) -> float:
        p = self.sigma_points
        return max((abs(p[i] + p[-1 - i]) for i in range(len(p))), default=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sigma_points"] = list(self.sigma_points)
        d["encloses"] = list(self.encloses)
        d["alpha"] = list(self.alpha)
        return d


@dataclass
class RegionLabel:
    n_crossing: int = 0
    stabilities: list[str] = field(default_factory=list)
    sliding: str = "none"
    sliding_arrival: str | None = None
    critical: str = "none"
    connections: list[str] = field(default_factory=list)
    pseudo_eq: int = 0
    enclosure: str | None = None
    partial: bool = False
    notes: list[str] = field(default_factory=list)

    def key(self) -> tuple:
        """Hashable summary used to compare labels between cells."""
        return (self.n_crossing, tuple(self.stabilities), self.sliding, self.sliding_arrival,
                self.critical, tuple(sorted(self.connections)), self.enclosure)

    def name(self) -> str:
        parts = [f"{self.n_crossing}x"]
        if self.stabilities:
            parts.append("/".join(self.stabilities))
        if self.enclosure:
            parts.append(self.enclosure)
        if self.sliding != "none":
            parts.append(f"sliding-{self.sliding}" + (f"@{self.sliding_arrival}" if self.sliding_arrival else ""))
        if self.critical != "none":
            parts.append(self.critical)
        parts.extend(sorted(self.connections))
        return " ".join(parts)

    def to_dict(self) -> dict:
        return {
            "n_crossing": self.n_crossing,
            "stabilities": list(self.stabilities),
            "sliding": self.sliding,
            "sliding_arrival": self.sliding_arrival,
            "critical": self.critical,
            "connections": sorted(self.connections),
            "pseudo_eq": self.pseudo_eq,
            "enclosure": self.enclosure,
            "partial": self.partial,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionLabel":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class Inventory:
    """Everything found at one parameter value, before labelling."""

    case: str
    alpha: tuple[float, ...]
    cycles: list[CycleRecord] = field(default_factory=list)
    connections: list[str] = field(default_factory=list)
    gaps: dict[str, float] = field(default_factory=dict)
    geometry: dict[str, float] = field(default_factory=dict)
    pseudo_eq: int = 0
    notes: list[str] = field(default_factory=list)
    partial: bool = False


def _require_orientation(model: FilippovModel) -> None:
    f0 = model.value("f", -model.a, 0.0, model.alpha0())
    if not f0 > 0:
        raise UnsupportedGeometry("inventories assume f+(-a, 0; 0) > 0")


def _verdict(rp: float, tol: float) -> str:
    if abs(abs(rp) - 1.0) < tol:
        return "double"
    return "stable" if abs(rp) < 1.0 else "unstable"


def return_map_derivative(model: FilippovModel, case: str, cycle: CycleRecord,
                          cfg: CycleConfig = DEFAULT_CYCLE_CONFIG, tangencies: Sequence[float] = ()) -> float:
    """R'(x0) by centered differences of R(x) = -sigma(-sigma(x)).

    The step stays below a quarter of the distance to the nearest tangency
    so both stencil points start on the crossing set.
    """
    if cycle.kind != "crossing":
        raise ValueError("return-map derivative is defined for crossing cycles")
    x0 = cycle.sigma_points[0]
    al = cycle.alpha
    dist = min((abs(x0 - t) for t in tangencies), default=math.inf)
    h = min(1e-6, 0.25 * dist)
    R = lambda x: maps.return_map(model, x, al, cfg.maps)  # noqa: E731
    return (R(x0 + h) - R(x0 - h)) / (2 * h)


def _crossing(model, case, x0, sx, al, cfg, encloses=(), tangencies=()) -> CycleRecord:
    rec = CycleRecord("crossing", "hyperbolic", (x0, -x0), None, "", tuple(encloses), al)
    if cfg.derivative == "fd":
        rp = return_map_derivative(model, case, rec, cfg, tangencies)
    else:
        # at a symmetric cycle both half returns have the same slope
        rp = sx * sx
    rec.derivative = rp
    rec.stability = _verdict(rp, cfg.double_tol)
    if rec.stability == "double":
        rec.subkind = "fold-of-cycles"
    return rec


def _t1_root(model, al, x0, first, lo, hi, cfg) -> tuple[float, float]:
    """Zero of T1 and sigma_x there."""
    fn = lambda x: maps.map_T1_dx(model, x, al, cfg.maps)  # noqa: E731
    r, d = newton_from(fn, x0, lo, hi, first=first, ftol=1e-13)
    return r, d - 1.0


def _window(model, cfg) -> tuple[float, float]:
    w = cfg.maps.window * model.a
    return -model.a - w, -model.a + w


# ------------------------------------------------------------------ codim 1


def _codim1(model, al, cfg) -> Inventory:
    inv = Inventory("codim1", al)
    lo, hi = _window(model, cfg)
    fold = upper_fold(model, -model.a, al)
    inv.geometry["fold"] = fold
    s, sx = maps.sigma_full_dx(model, fold, al, cfg.maps)
    e = s + fold
    inv.gaps["T1_fold"] = e
    if abs(e) <= cfg.zero_tol:
        inv.cycles.append(CycleRecord("critical-crossing", "through-fold", (fold, -fold), sx * sx,
                                      "internally-stable", (), al))
    elif e < 0:
        r, rsx = _t1_root(model, al, fold, (e, sx + 1.0), fold, hi, cfg)
        inv.cycles.append(_crossing(model, "codim1", r, rsx, al, cfg, (), (fold,)))
    else:
        x_l = s
        v = sliding_velocity(model, x_l, al)
        if v < 0:
            inv.cycles.append(CycleRecord("sliding", "slides-on-S1", tuple(sorted((-x_l, fold, -fold, x_l))),
                                          0.0, "stable", (), al))
        else:
            inv.notes.append("landing point does not slide back to the fold")
    return inv


# --------------------------------------------------------------------- cusp


def _cusp(model, al, cfg) -> Inventory:
    inv = Inventory("cusp", al)
    lo, hi = _window(model, cfg)
    tol = cfg.zero_tol
    phi1, xi1, roots, xc = cusp_geometry(model, al)
    inv.geometry.update(phi1=phi1, xi1=xi1, critical=xc)
    if len(roots) < 2 or phi1 <= tol:
        v, d = maps.map_T1_dx(model, -xi1, al, cfg.maps)
        inv.gaps["phi2"] = v
        cusp_like = phi1 > -tol
        if cusp_like and abs(v) <= tol:
            inv.cycles.append(CycleRecord("critical-crossing", "through-cusp", (xc, -xc), (d - 1.0) ** 2,
                                          "stable", (), al))
            return inv
        r, sx = _t1_root(model, al, -xi1, (v, d), lo, hi, cfg)
        enc = ("T_c",) if cusp_like and r < xc else ()
        inv.cycles.append(_crossing(model, "cusp", r, sx, al, cfg, enc, (xc,) if cusp_like else ()))
        return inv
    t_iv, t_v = roots
    inv.geometry.update(invisible=t_iv, visible=t_v)
    s, sx = maps.sigma_full_dx(model, t_v, al, cfg.maps)
    e_cs = s + t_v
    x_l = s
    inv.gaps["CS"] = e_cs
    inv.gaps["SS"] = e_cs - (t_v - t_iv)
    if abs(e_cs) <= tol:
        inv.cycles.append(CycleRecord("critical-crossing", "through-fold-T_v", (t_v, -t_v), sx * sx,
                                      "internally-stable", (), al))
        return inv
    if e_cs < 0:
        r, rsx = _t1_root(model, al, t_v, (e_cs, sx + 1.0), t_v, hi, cfg)
        inv.cycles.append(_crossing(model, "cusp", r, rsx, al, cfg, (), (t_v,)))
        return inv
    # the orbit leaving T_v lands to the right of -T_v
    ss = x_l + t_iv
    if ss < -tol:
        inv.cycles.append(_sliding_cusp(model, al, "from-Sigma+", (-x_l, t_v, -t_v, x_l), inv))
        return inv
    if ss <= tol:
        inv.cycles.append(_sliding_cusp(model, al, "at-T_iv", (-x_l, t_v, -t_v, x_l), inv))
        return inv
    varsigma = -maps.backward_fold_map(model, t_v, al, cfg.maps)
    inv.geometry["varsigma"] = varsigma
    e_gs = x_l - varsigma
    inv.gaps["GS"] = e_gs
    if abs(e_gs) <= tol:
        inv.cycles.append(CycleRecord("critical-crossing", "through-backward-fold-image",
                                      (-x_l, t_v, -t_v, x_l), None, "externally-stable", (), al))
        return inv
    if e_gs < 0:
        # the lower arc from x_l is the mirror of the small upper arc from -x_l
        y = maps.backward_fold_map(model, -x_l, al, cfg.maps)
        if t_iv < y < t_v:
            inv.cycles.append(_sliding_cusp(model, al, "from-Sigma-", (-x_l, y, t_v, -t_v, -y, x_l), inv))
        else:
            inv.notes.append(f"lower arc from {x_l} lands outside the band at {-y}")
            inv.partial = True
        return inv
    r, rsx = _t1_root(model, al, -x_l, None, lo, t_iv, cfg)
    if r >= -varsigma:
        inv.notes.append("T1 zero inside the fold band")
        inv.partial = True
        return inv
    inv.cycles.append(_crossing(model, "cusp", r, rsx, al, cfg, ("T_iv", "T_v"), (t_iv, -varsigma)))
    return inv


def _sliding_cusp(model, al, arrival, pts, inv) -> CycleRecord:
    # sliding on the band near -a runs toward the visible fold
    t_v = inv.geometry["visible"]
    t_iv = inv.geometry["invisible"]
    if not sliding_velocity(model, 0.5 * (t_iv + t_v), al) > 0:
        inv.notes.append("band slides away from the visible fold")
        inv.partial = True
    return CycleRecord("sliding", arrival, tuple(sorted(pts)), 0.0, "stable", (), al)


# ----------------------------------------------------------------- fold-fold


def foldfold_geometry(model, al) -> dict[str, float]:
    a = model.a
    v1m = -upper_fold(model, -a, al)
    v1p = upper_fold(model, a, al)
    geo = {"vartheta1_minus": v1m, "vartheta1_plus": v1p, "phi1": v1p - v1m}
    try:
        geo["varpi"] = varpi(model, al)
    except RootError:
        pass
    return geo


def find_connections(model: FilippovModel, alpha: Sequence[float],
                     cfg: CycleConfig = DEFAULT_CYCLE_CONFIG, geometry: dict | None = None) -> tuple[list[str], dict]:
    """Connections of the fold-fold unfolding from the signed gap functions.

    Returns (connection names, gap values).  Names follow the orbit from the
    upper fold near -a (phi1 >= 0) or backward from the upper fold near a
    (phi1 < 0).
    """
    al = _alpha(alpha, model.m)
    geo = foldfold_geometry(model, al) if geometry is None else geometry
    tol = cfg.zero_tol
    mc = cfg.maps
    v1m, v1p, phi1 = geo["vartheta1_minus"], geo["vartheta1_plus"], geo["phi1"]
    sp = lambda x: maps.sigma_half(model, "plus", x, al, mc)  # noqa: E731
    sm = lambda x: maps.sigma_half(model, "minus", x, al, mc)  # noqa: E731
    s_um = sp(-v1m)
    s_lp = sm(v1p)
    gaps = {"G5": s_um - s_lp}
    out: list[str] = []
    g5 = gaps["G5"]
    if abs(phi1) <= tol:
        # the two folds coincide: only the fold-to-fold orbit is meaningful
        gaps["T2_minus"] = s_um - sm(v1m)
        if abs(g5) <= tol:
            out.append("tangent-tangent:T_u-->T_u+")
        return out, gaps
    w = geo.get("varpi")
    if phi1 > 0:
        if w is not None:
            gaps["G6"] = s_um - sm(w)
        gaps["T2_minus"] = s_um - sm(v1m)
        g6, t2 = gaps.get("G6"), gaps["T2_minus"]
        if g5 > tol:
            return out, gaps
        if abs(g5) <= tol:
            out.append("tangent-tangent:T_u-->T_u+")
        elif g6 is None:
            out.append("unresolved")
        elif g6 > tol:
            out.append("tangent-tangent-sliding:T_u-->T_u+")
        elif abs(g6) <= tol:
            out.append("tangent-equilibrium:T_u-->E_p+")
        elif t2 > tol:
            out.append("tangent-tangent-sliding:T_u-->T_l+")
        elif abs(t2) <= tol:
            out.append("tangent-tangent:T_u-->T_l+")
        return out, gaps
    if w is not None:
        gaps["G7"] = sp(-w) - s_lp
    gaps["T2_plus"] = sp(-v1p) - s_lp
    g7, t2 = gaps.get("G7"), gaps["T2_plus"]
    if g5 < -tol:
        return out, gaps
    if abs(g5) <= tol:
        out.append("tangent-tangent:T_u-->T_u+")
    elif g7 is None:
        out.append("unresolved")
    elif g7 < -tol:
        out.append("tangent-tangent-sliding:T_u-->T_u+")
    elif abs(g7) <= tol:
        out.append("tangent-equilibrium:E_p-->T_u+")
    elif t2 < -tol:
        out.append("tangent-tangent-sliding:T_l-->T_u+")
    elif abs(t2) <= tol:
        out.append("tangent-tangent:T_l-->T_u+")
    return out, gaps


def _t2_roots(model, al, geo, cfg, inv) -> None:
    from .coeffs import t2_critical_point

    mc = cfg.maps
    lo, hi = _window(model, cfg)
    v1m, v1p = geo["vartheta1_minus"], geo["vartheta1_plus"]
    left = max(-v1m, -v1p)  # crossing-up points lie to the right of both folds
    xs = t2_critical_point(model, al, -0.5 * (v1m + v1p), mc)
    fn = lambda x: maps.map_T2_dx(model, x, al, mc)  # noqa: E731
    top, _ = fn(xs)
    h = mc.fd_step2
    t2xx = (fn(xs + h)[1] - fn(xs - h)[1]) / (2 * h)
    inv.geometry.update(x_star=xs, T2_max=top, T2_xx=t2xx)
    if top < -cfg.zero_tol or t2xx >= 0:
        return
    found = []
    if top <= cfg.zero_tol:
        found.append((xs, 0.0))
    else:
        dx = math.sqrt(-2.0 * top / t2xx)
        for guess, a, b in ((xs - dx, lo, xs), (xs + dx, xs, hi)):
            try:
                r, d = newton_from(fn, guess, a, b, ftol=1e-13)
            except RootError as exc:
                inv.notes.append(f"T2 root near {guess}: {exc}")
                inv.partial = True
                continue
            found.append((r, d))
    for r, d in found:
        if r <= left:
            continue
        _, sx = maps.sigma_full_dx(model, r, al, mc)
        rec = _crossing(model, "foldfold", r, sx, al, cfg, (), (-v1m, -v1p))
        if abs(d) < cfg.double_tol:
            rec.stability, rec.subkind = "double", "fold-of-cycles"
        inv.cycles.append(rec)
    inv.cycles.sort(key=lambda c: c.sigma_points[0])


def _foldfold(model, al, cfg) -> Inventory:
    inv = Inventory("foldfold", al)
    tol = cfg.zero_tol
    geo = foldfold_geometry(model, al)
    inv.geometry.update(geo)
    v1m, v1p, phi1 = geo["vartheta1_minus"], geo["vartheta1_plus"], geo["phi1"]
    w = geo.get("varpi")
    if abs(phi1) > tol and w is not None:
        inv.pseudo_eq = 2
    _t2_roots(model, al, geo, cfg, inv)
    conns, gaps = find_connections(model, al, cfg, geo)
    inv.connections, inv.gaps = conns, gaps
    mc = cfg.maps
    t2 = gaps.get("T2_minus" if phi1 >= 0 else "T2_plus")
    if abs(phi1) <= tol:
        if abs(gaps["G5"]) <= tol:
            inv.cycles.append(CycleRecord("critical-crossing", "through-fold-fold", (-v1m, v1m), None,
                                          "internally-unstable", (), al))
    elif phi1 > 0:
        if abs(t2) <= tol:
            inv.cycles.append(CycleRecord("critical-crossing", "through-T_u-T_l", (-v1m, v1m), None,
                                          "internally-stable", (), al))
        elif w is not None and "tangent-tangent-sliding:T_u-->T_l+" in conns:
            x_l = _shoot(model, -v1m, al, "fwd", mc)
            if x_l is not None and v1m < x_l < w:
                inv.cycles.append(CycleRecord("sliding", "slides-on-S3", tuple(sorted((-x_l, -v1m, v1m, x_l))),
                                              0.0, "stable", (), al))
    else:
        if abs(t2) <= tol:
            inv.cycles.append(CycleRecord("critical-crossing", "through-T_l-T_u", (-v1p, v1p), None,
                                          "internally-unstable", (), al))
        elif w is not None and "tangent-tangent-sliding:T_l-->T_u+" in conns:
            x_b = _shoot(model, v1p, al, "bwd", mc)
            if x_b is not None and -w < x_b < -v1p:
                inv.cycles.append(CycleRecord("sliding", "slides-on-S3", tuple(sorted((x_b, -v1p, v1p, -x_b))),
                                              math.inf, "unstable", (), al))
    return inv


def _shoot(model, x, al, direction, mc) -> float | None:
    """First return of the upper orbit through (x, 0), or None when it escapes."""
    try:
        x1 = maps.first_hit(model, x, al, direction, mc)
    except maps.MapDomainError:
        return None
    if abs(abs(x1) - model.a) > 2 * mc.window * model.a:
        return None
    return x1


# -------------------------------------------------------------- public API


_INVENTORIES = {"codim1": _codim1, "cusp": _cusp, "foldfold": _foldfold}


def inventory(model: FilippovModel, case: str, alpha: Sequence[float],
              cfg: CycleConfig = DEFAULT_CYCLE_CONFIG) -> Inventory:
    if case not in CASES:
        raise ValueError(f"case must be one of {CASES}")
    _require_orientation(model)
    return _INVENTORIES[case](model, _alpha(alpha, model.m), cfg)


def find_cycles(model: FilippovModel, case: str, alpha: Sequence[float],
                cfg: CycleConfig = DEFAULT_CYCLE_CONFIG) -> list[CycleRecord]:
    return inventory(model, case, alpha, cfg).cycles


def label_from_inventory(inv: Inventory) -> RegionLabel:
    lab = RegionLabel(pseudo_eq=inv.pseudo_eq, partial=inv.partial, notes=list(inv.notes))
    crossing = [c for c in inv.cycles if c.kind == "crossing"]
    lab.n_crossing = len(crossing)
    lab.stabilities = [c.stability for c in crossing]
    if crossing:
        enc = crossing[-1].encloses
        lab.enclosure = "encloses-" + "+".join(enc) if enc else "no-enclosure"
    for c in inv.cycles:
        if c.kind == "sliding":
            lab.sliding = c.stability
            lab.sliding_arrival = c.subkind
        elif c.kind == "critical-crossing":
            lab.critical = f"{c.subkind}:{c.stability}"
    lab.connections = list(inv.connections)
    return lab


def classify_dynamics(model: FilippovModel, case: str, alpha: Sequence[float],
                      cfg: CycleConfig = DEFAULT_CYCLE_CONFIG) -> RegionLabel:
    """Region label at alpha; numerical failures mark the label partial."""
    try:
        return label_from_inventory(inventory(model, case, alpha, cfg))
    except (maps.MapDomainError, RootError, UnfoldingError, ArithmeticError) as exc:
        return RegionLabel(partial=True, notes=[f"{type(exc).__name__}: {exc}"])
