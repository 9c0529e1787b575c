"""Transition maps near the critical crossing cycle.

* ``sigma_half(plus)``:  forward from (x, 0) near (-a, 0) to the section Pi
* ``sigma_half(minus)``: backward from (x, 0) near (a, 0) to Pi
* ``sigma_full``:        forward from (x, 0) near (-a, 0) back to y = 0 near a
* ``map_T1``, ``map_T2``: the symmetric-cycle equations
* ``backward_fold_map``: pairs the two ends of small upper arcs near a fold

Derivatives with respect to x use the Liouville identity
``sigma_x = g(x0) exp(int div) / g(x1)``; parameter derivatives use the
weighted integrals K_i co-integrated along the orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .flow import MAP_OPTIONS, Arc, EventNotFound, IntegratorOptions, _upper_arc, reference_orbit
from .model import FilippovModel, _alpha


class MapDomainError(ArithmeticError):
    """The orbit leaves the region where the map is defined."""


class NonTransversalLanding(MapDomainError):
    pass


@dataclass(frozen=True)
class SectionSpec:
    b: float
    c: float
    delta: float
    tau_plus: float  # time from (-a, 0) to (b, c) along the reference orbit
    tau_minus: float  # time from (a, 0) to (b, c), negative
    g_bc: float


@dataclass(frozen=True)
class MapConfig:
    window: float = 0.15  # fraction of a
    opts: IntegratorOptions = MAP_OPTIONS
    transversal_tol: float = 1e-9
    fd_step1: float = 1e-5
    fd_step2: float = 1e-4


DEFAULT_CONFIG = MapConfig()


def _memo(model: FilippovModel) -> dict:
    d = model.__dict__.get("_map_memo")
    if d is None:
        d = {}
        model.__dict__["_map_memo"] = d
    return d


def reference_section(model: FilippovModel, delta_frac: float = 0.1) -> SectionSpec:
    """Section point on the descending branch of the reference orbit at half height."""
    memo = _memo(model)
    key = ("section", delta_frac)
    if key in memo:
        return memo[key]
    orbit = reference_orbit(model)
    c = 0.5 * orbit.y_max
    al = model.alpha0()
    sol = orbit.sol
    t_c = brentq(lambda t: sol(t)[1] - c, orbit.t_peak, orbit.tau0, xtol=1e-15, rtol=1e-15)
    b = float(sol(t_c)[0])
    g_bc = model.value("g", b, c, al)
    if not g_bc < 0:
        raise MapDomainError("no descending branch on the reference orbit")
    spec = SectionSpec(b, c, delta_frac * model.a, float(t_c), float(t_c - orbit.tau0), g_bc)
    memo[key] = spec
    return spec


def _horizon(model: FilippovModel) -> float:
    sec = reference_section(model)
    return 4.0 * (sec.tau_plus - sec.tau_minus) + 1.0


def _check_window(model, x, center, cfg):
    if abs(x - center) > cfg.window * model.a * (1 + 1e-12):
        raise MapDomainError(f"x={x} outside the map window around {center}")


def section_arc(
    model: FilippovModel,
    side: str,
    x: float,
    al: tuple,
    cfg: MapConfig = DEFAULT_CONFIG,
    *,
    div: bool = False,
    kappa: bool = False,
    variational: bool = False,
) -> Arc:
    sec = reference_section(model)
    a = model.a
    if side == "plus":
        _check_window(model, x, -a, cfg)
        direction, crossing = "fwd", -1
    elif side == "minus":
        _check_window(model, x, a, cfg)
        direction, crossing = "bwd", 1
    else:
        raise ValueError("side must be 'plus' or 'minus'")
    try:
        arc = _upper_arc(model, (x, 0.0), al, direction, "section", cfg.opts, section=(sec.c, crossing),
                         t_max=_horizon(model), div=div, kappa=kappa, variational=variational)
    except EventNotFound:
        raise MapDomainError(f"orbit from x={x} misses the section") from None
    if abs(arc.state[0] - sec.b) >= sec.delta:
        raise MapDomainError(f"orbit from x={x} crosses y=c outside the section")
    return arc


def landing_arc(
    model: FilippovModel,
    x: float,
    al: tuple,
    cfg: MapConfig = DEFAULT_CONFIG,
    *,
    div: bool = False,
    kappa: bool = False,
    variational: bool = False,
) -> Arc:
    a = model.a
    _check_window(model, x, -a, cfg)
    try:
        arc = _upper_arc(model, (x, 0.0), al, "fwd", "boundary", cfg.opts, arm_x=0.0,
                         t_max=_horizon(model), div=div, kappa=kappa, variational=variational)
    except EventNotFound:
        raise MapDomainError(f"orbit from x={x} does not return to the boundary") from None
    x1 = arc.state[0]
    if abs(x1 - a) > 2 * cfg.window * a:
        raise MapDomainError(f"orbit from x={x} lands at {x1}, far from a")
    g1 = model.kernel("g")(float(x1), 0.0, al)[0]
    if abs(g1) < cfg.transversal_tol:
        raise NonTransversalLanding(f"tangential landing at x={x1}")
    return arc


def sigma_half(model: FilippovModel, side: str, x: float, alpha: Sequence[float],
               cfg: MapConfig = DEFAULT_CONFIG) -> float:
    al = _alpha(alpha, model.m)
    return float(section_arc(model, side, float(x), al, cfg).state[0])


def sigma_full(model: FilippovModel, x: float, alpha: Sequence[float], cfg: MapConfig = DEFAULT_CONFIG) -> float:
    al = _alpha(alpha, model.m)
    return float(landing_arc(model, float(x), al, cfg).state[0])


def _value_and_slope(model, arc: Arc, x0: float, y1: float, al) -> tuple[float, float]:
    g = model.kernel("g")
    x1 = float(arc.state[0])
    g0 = g(x0, 0.0, al)[0]
    g1 = g(x1, y1, al)[0]
    return x1, g0 / g1 * math.exp(arc.state[2])


def sigma_half_dx(model, side, x, alpha, cfg=DEFAULT_CONFIG) -> tuple[float, float]:
    """(sigma, sigma_x) for a half map, sigma_x from the Liouville identity."""
    al = _alpha(alpha, model.m)
    arc = section_arc(model, side, float(x), al, cfg, div=True)
    return _value_and_slope(model, arc, float(x), reference_section(model).c, al)


def sigma_full_dx(model, x, alpha, cfg=DEFAULT_CONFIG) -> tuple[float, float]:
    al = _alpha(alpha, model.m)
    arc = landing_arc(model, float(x), al, cfg, div=True)
    return _value_and_slope(model, arc, float(x), 0.0, al)


def map_T1(model: FilippovModel, x: float, alpha: Sequence[float], cfg: MapConfig = DEFAULT_CONFIG) -> float:
    return sigma_full(model, x, alpha, cfg) + x


def map_T1_dx(model, x, alpha, cfg=DEFAULT_CONFIG) -> tuple[float, float]:
    s, sx = sigma_full_dx(model, x, alpha, cfg)
    return s + x, sx + 1.0


def map_T2(model: FilippovModel, x: float, alpha: Sequence[float], cfg: MapConfig = DEFAULT_CONFIG) -> float:
    return sigma_half(model, "plus", x, alpha, cfg) - sigma_half(model, "minus", -x, alpha, cfg)


def map_T2_dx(model, x, alpha, cfg=DEFAULT_CONFIG) -> tuple[float, float]:
    sp, spx = sigma_half_dx(model, "plus", x, alpha, cfg)
    sm, smx = sigma_half_dx(model, "minus", -x, alpha, cfg)
    return sp - sm, spx + smx


def return_map(model, x, alpha, cfg=DEFAULT_CONFIG) -> float:
    """Full Z2 return map R(x) = -sigma(-sigma(x)) on the left crossing points."""
    return -sigma_full(model, -sigma_full(model, x, alpha, cfg), alpha, cfg)


# --------------------------------------------------------- backward fold map


def first_hit(model: FilippovModel, x: float, alpha: Sequence[float], direction: str = "fwd",
              cfg: MapConfig = DEFAULT_CONFIG) -> float:
    """Abscissa where the upper orbit through (x, 0) first returns to y = 0."""
    al = _alpha(alpha, model.m)
    try:
        arc = _upper_arc(model, (float(x), 0.0), al, direction, "boundary", cfg.opts, t_max=_horizon(model))
    except EventNotFound:
        raise MapDomainError(f"upper orbit through x={x} does not return") from None
    return float(arc.state[0])


def backward_fold_map(model: FilippovModel, x: float, alpha: Sequence[float],
                      cfg: MapConfig = DEFAULT_CONFIG) -> float:
    """Other end of the small upper arc through (x, 0).

    Points where the upper field points down (g+ < 0, the sliding band) are
    followed backward in time; points where it points up are followed
    forward, which makes the map an involution.  An invisible fold is a
    fixed point.
    """
    al = _alpha(alpha, model.m)
    x = float(x)
    g, lg = model.kernel("g", "Lg")(x, 0.0, al)
    tol = cfg.opts.tangency_tol
    if abs(g) < tol and lg < 0:
        return x
    direction = "bwd" if g < 0 or (abs(g) < tol and lg > 0) else "fwd"
    x1 = first_hit(model, x, al, direction, cfg)
    if abs(x1 + model.a) > 2 * cfg.window * model.a:
        raise MapDomainError(f"backward orbit from x={x} leaves the fold neighborhood")
    return x1


# ------------------------------------------------------------- derivatives


def _arc_for(model, which_map, x, al, cfg, **kw) -> tuple[Arc, float]:
    if which_map == "full":
        return landing_arc(model, x, al, cfg, **kw), 0.0
    return section_arc(model, which_map, x, al, cfg, **kw), reference_section(model).c


def sigma_value(model, which_map: str, x: float, alpha, cfg=DEFAULT_CONFIG) -> float:
    if which_map == "full":
        return sigma_full(model, x, alpha, cfg)
    return sigma_half(model, which_map, x, alpha, cfg)


def _sigma_x(model, which_map, x, al, cfg) -> float:
    arc, y1 = _arc_for(model, which_map, x, al, cfg, div=True)
    return _value_and_slope(model, arc, x, y1, al)[1]


def _sigma_alpha(model, which_map, x, al, i, cfg) -> float:
    arc, y1 = _arc_for(model, which_map, x, al, cfg, kappa=True)
    g1 = model.kernel("g")(float(arc.state[0]), y1, al)[0]
    K = arc.part("K")[i]
    return -K * math.exp(arc.state[2]) / g1


def sigma_second_analytic(model, which_map, x, al, i=None, cfg=DEFAULT_CONFIG) -> float:
    """Second derivatives from the variational integrals (xx or x-alpha_i)."""
    arc, y1 = _arc_for(model, which_map, x, al, cfg, variational=True)
    x1 = float(arc.state[0])
    k = model.kernel("g", "g_x", "div")
    g0, gx0, _ = k(x, 0.0, al)
    g1, gx1, div1 = k(x1, y1, al)
    E = math.exp(arc.state[2])
    Phi = arc.Phi
    sx = g0 / g1 * E
    if i is None:
        tau_x = -Phi[1, 0] / g1
        Lx = arc.part("Lx")[0]
        return E * gx0 / g1 - E * g0 * gx1 * sx / g1**2 + sx * (div1 * tau_x + Lx)
    w = arc.sens[:, i]
    ga0 = model.value(f"g_a{i + 1}", x, 0.0, al)
    ga1 = model.value(f"g_a{i + 1}", x1, y1, al)
    f1 = model.value("f", x1, y1, al)
    s_alpha = (w[0] * g1 - f1 * w[1]) / g1
    tau_a = -w[1] / g1
    La = arc.part("La")[i]
    return ga0 * E / g1 - g0 * E / g1**2 * (gx1 * s_alpha + ga1) + sx * (div1 * tau_a + La)


def sigma_derivatives(
    model: FilippovModel,
    which: str,
    map: str,
    at: float,
    alpha: Sequence[float],
    method: str = "analytic",
    i: int = 0,
    full: bool = False,
    cfg: MapConfig = DEFAULT_CONFIG,
) -> float:
    """Partial derivative of a transition map.

    ``which`` is ``x``, ``xx``, ``alpha`` or ``x_alpha`` (the latter two for
    parameter index ``i``, zero-based); ``map`` is ``plus``, ``minus`` or
    ``full``.  With ``method='analytic'`` second derivatives default to a
    centered difference of the analytic first derivative; ``full=True``
    switches to the fully variational formulas.
    """
    al = _alpha(alpha, model.m)
    x = float(at)
    h1, h2 = cfg.fd_step1, cfg.fd_step2

    def shifted(d):
        return tuple(v + (d if j == i else 0.0) for j, v in enumerate(al))

    if method == "analytic":
        if which == "x":
            return _sigma_x(model, map, x, al, cfg)
        if which == "alpha":
            return _sigma_alpha(model, map, x, al, i, cfg)
        if which == "xx":
            if full:
                return sigma_second_analytic(model, map, x, al, None, cfg)
            return (_sigma_x(model, map, x + h2, al, cfg) - _sigma_x(model, map, x - h2, al, cfg)) / (2 * h2)
        if which == "x_alpha":
            if full:
                return sigma_second_analytic(model, map, x, al, i, cfg)
            return (_sigma_x(model, map, x, shifted(h2), cfg) - _sigma_x(model, map, x, shifted(-h2), cfg)) / (2 * h2)
        raise ValueError(f"unknown derivative {which!r}")
    if method != "fd":
        raise ValueError("method must be 'analytic' or 'fd'")
    s = lambda xx, aa=al: sigma_value(model, map, xx, aa, cfg)  # noqa: E731
    if which == "x":
        return (s(x + h1) - s(x - h1)) / (2 * h1)
    if which == "alpha":
        return (s(x, shifted(h1)) - s(x, shifted(-h1))) / (2 * h1)
    if which == "xx":
        return (s(x + h2) - 2 * s(x) + s(x - h2)) / h2**2
    if which == "x_alpha":
        return (s(x + h2, shifted(h2)) - s(x + h2, shifted(-h2)) - s(x - h2, shifted(h2))
                + s(x - h2, shifted(-h2))) / (4 * h2 * h2)
    raise ValueError(f"unknown derivative {which!r}")


def map_trace(model, which: str, xs: Sequence[float], alpha, cfg=DEFAULT_CONFIG) -> str:
    """CSV trace (x, value, derivative) of T1, T2 or a sigma map."""
    rows = ["x,value,derivative"]
    for x in xs:
        if which == "T1":
            v, d = map_T1_dx(model, x, alpha, cfg)
        elif which == "T2":
            v, d = map_T2_dx(model, x, alpha, cfg)
        elif which == "full":
            v, d = sigma_full_dx(model, x, alpha, cfg)
        else:
            v, d = sigma_half_dx(model, which, x, alpha, cfg)
        rows.append(f"{float(x)!r},{v!r},{d!r}")
    return "\n".join(rows) + "\n"
