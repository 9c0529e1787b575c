"""Bifurcation coefficients along the critical crossing cycle and the
measured unfolding coordinates at a given parameter value.

Integrals along the reference orbit are computed twice: once co-integrated
with the orbit and once by adaptive Gauss-Kronrod quadrature on its dense
output.  The disagreement, plus the quadrature error estimate, is the error
bar attached to each integral and propagated to the derived coefficients.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.optimize import brentq

from . import maps
from .boundary import sliding_function
from .flow import MAP_OPTIONS, _upper_arc, reference_orbit
from .model import CASES, FilippovModel, _alpha
from .roots import RootError, bracketed_roots, root_near, secant


class QuadratureError(ArithmeticError):
    pass


class UnfoldingError(ArithmeticError):
    """The root structure needed for a measured coordinate is absent."""


QUAD_EPSABS = 1e-11


@dataclass
class OrbitIntegrals:
    """div and kappa integrals over one arc of the reference orbit."""

    tau: float
    lam: float  # exp of the divergence integral over the whole arc
    kappa: np.ndarray
    lam_err: float
    kappa_err: np.ndarray


@dataclass
class CoefficientReport:
    case: str
    tau0: float
    lambda0: float
    lambda_plus0: float
    lambda_minus0: float
    kappa: list[float]
    kappa_plus: list[float]
    kappa_minus: list[float]
    theta: list[float] | None = None
    zeta: list[float] | None = None
    eta: list[float] | None = None
    mu: list[float] | None = None
    Delta: float | None = None
    r: float | None = None
    vartheta_leading: dict[str, float] | None = None
    errors: dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _arc_integrals(model: FilippovModel, start: tuple[float, float], direction: str, tau: float) -> OrbitIntegrals:
    al = model.alpha0()
    m = model.m
    arc = _upper_arc(model, start, al, direction, "time", MAP_OPTIONS, t_max=abs(tau), kappa=True, dense=True)
    sol = arc.sol
    t_end = arc.t1
    J_end = float(arc.state[2])
    K_end = arc.part("K")
    dk = model.kernel("div")
    names = ["f", "g"] + [f"g_a{i + 1}" for i in range(m)] + [f"f_a{i + 1}" for i in range(m)]
    fk = model.kernel(*names)

    lo, hi = (0.0, t_end) if t_end >= 0 else (t_end, 0.0)
    sign = 1.0 if t_end >= 0 else -1.0

    def integrate(fn: Callable[[float], float]) -> tuple[float, float]:
        val, err = quad(fn, lo, hi, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)
        return sign * val, err

    J_q, J_qerr = integrate(lambda t: dk(*sol(t)[:2], al)[0])
    lam = math.exp(J_end)
    lam_err = lam * (abs(J_q - J_end) + J_qerr)

    kap = np.empty(m)
    kap_err = np.empty(m)
    for i in range(m):
        def F(t, i=i):
            u = sol(t)
            v = fk(u[0], u[1], al)
            f, g, ga, fa = v[0], v[1], v[2 + i], v[2 + m + i]
            return math.exp(J_end - u[2]) * (f * ga - g * fa)

        kq, kqerr = integrate(F)
        kc = lam * K_end[i]
        kap[i] = kq
        kap_err[i] = abs(kq - kc) + kqerr
    if not np.all(np.isfinite(kap)):
        raise QuadratureError("non-finite kappa integral")
    return OrbitIntegrals(float(t_end), lam, kap, lam_err, kap_err)


def orbit_integrals(model: FilippovModel) -> dict[str, OrbitIntegrals]:
    """Integrals over the full reference orbit and its two halves at the section."""
    memo = maps._memo(model)
    if "integrals" in memo:
        return memo["integrals"]
    a = model.a
    orbit = reference_orbit(model)
    sec = maps.reference_section(model)
    out = {
        "full": _arc_integrals(model, (-a, 0.0), "fwd", orbit.tau0),
        "plus": _arc_integrals(model, (-a, 0.0), "fwd", sec.tau_plus),
        "minus": _arc_integrals(model, (a, 0.0), "bwd", sec.tau_minus),
    }
    memo["integrals"] = out
    return out


def _derived(model: FilippovModel, case: str, lam0: float, kappa: np.ndarray) -> dict:
    """Coefficients of the given case as functions of lambda(0) and kappa."""
    a = model.a
    al = model.alpha0()
    m = model.m
    v = lambda name, x: model.value(name, x, 0.0, al)  # noqa: E731
    ga_l = np.array([v(f"g_a{i + 1}", -a) for i in range(m)])
    ga_r = np.array([v(f"g_a{i + 1}", a) for i in range(m)])
    out: dict = {}
    if case == "codim1":
        out["theta"] = -kappa / v("g", a) - ga_l / v("g_x", -a)
    elif case == "cusp":
        gxx = v("g_xx", -a)
        gxa = np.array([v(f"g_xa{i + 1}", -a) for i in range(m)])
        out["zeta"] = -2.0 * ga_l / gxx
        out["eta"] = -kappa / v("g", a) - gxa / gxx
    else:
        gx_l, gx_r = v("g_x", -a), v("g_x", a)
        f_l, f_r = v("f", -a), v("f", a)
        out["mu"] = -ga_l / gx_l - ga_r / gx_r
        D = gx_l * lam0 - gx_r
        out["Delta"] = D
        r = -f_l * gx_r / (gx_l * f_r + gx_r * f_l)
        out["r"] = r
        q = gx_r / D
        out["vartheta_leading"] = {
            "vartheta3": (1 + q) ** 2,
            "vartheta4": q**2,
            "vartheta5": q**2 + q,
            "vartheta6": q**2 + (1 - (1 + r) ** 2) * q,
            "vartheta7": (1 + q) ** 2 + (r * r - 1) * lam0 * gx_l / D,
        }
    return out


def _flatten(d: dict) -> dict[str, float]:
    flat = {}
    for k, val in d.items():
        if isinstance(val, dict):
            flat.update(val)
        elif np.ndim(val):
            for i, x in enumerate(np.ravel(val)):
                flat[f"{k}[{i}]"] = float(x)
        else:
            flat[k] = float(val)
    return flat


def _propagate(model, case, lam0, lam_err, kappa, kappa_err) -> dict[str, float]:
    """Linear error propagation by one-sided perturbation of the inputs."""
    base = _flatten(_derived(model, case, lam0, kappa))
    err = {k: 0.0 for k in base}
    perturbations = [(lam0 + lam_err, kappa)] + [
        (lam0, kappa + np.eye(len(kappa))[i] * kappa_err[i]) for i in range(len(kappa))
    ]
    for l_, k_ in perturbations:
        alt = _flatten(_derived(model, case, l_, k_))
        for k in base:
            err[k] += abs(alt[k] - base[k])
    return err


def coefficient_report(model: FilippovModel, case: str) -> CoefficientReport:
    if case not in CASES:
        raise ValueError(f"case must be one of {CASES}")
    ints = orbit_integrals(model)
    full, plus, minus = ints["full"], ints["plus"], ints["minus"]
    rep = CoefficientReport(
        case=case,
        tau0=full.tau,
        lambda0=full.lam,
        lambda_plus0=plus.lam,
        lambda_minus0=minus.lam,
        kappa=full.kappa.tolist(),
        kappa_plus=plus.kappa.tolist(),
        kappa_minus=minus.kappa.tolist(),
    )
    for k, val in _derived(model, case, full.lam, full.kappa).items():
        setattr(rep, k, val.tolist() if isinstance(val, np.ndarray) else val)
    rep.errors = {
        "lambda0": full.lam_err,
        "lambda_plus0": plus.lam_err,
        "lambda_minus0": minus.lam_err,
        "kappa": full.kappa_err.tolist(),
        "kappa_plus": plus.kappa_err.tolist(),
        "kappa_minus": minus.kappa_err.tolist(),
        "derived": _propagate(model, case, full.lam, full.lam_err, full.kappa, full.kappa_err),
    }
    worst = max([full.lam_err, plus.lam_err, minus.lam_err] + [float(e) for e in
                np.concatenate([full.kappa_err, plus.kappa_err, minus.kappa_err])])
    if worst > 1e-7:
        raise QuadratureError(f"quadrature disagreement {worst:.2e} exceeds 1e-7")
    return rep


# ------------------------------------------------------ measured unfolding


@dataclass
class MeasuredUnfolding:
    case: str
    alpha: list[float]
    rho1: float | None = None
    phi1: float | None = None
    xi1: float | None = None
    phi2: float | None = None
    phi2_hat: float | None = None
    # supporting geometry
    folds: dict[str, float] = field(default_factory=dict)
    varsigma: float | None = None
    varpi: float | None = None
    x_star: float | None = None

    def beta(self) -> tuple[float, float]:
        """The two leading unfolding coordinates of the case."""
        if self.case == "codim1":
            return (self.rho1, 0.0)
        if self.case == "cusp":
            return (self.phi1, self.phi2)
        return (self.phi1, self.phi2_hat)

    def to_dict(self) -> dict:
        return asdict(self)


UNFOLD_HALF_WIDTH = 0.1  # fraction of a searched around a fold point


def _g_on_sigma(model, al):
    k = model.kernel("g", "g_x", "g_xx")
    return (lambda x: k(x, 0.0, al)[0]), (lambda x: k(x, 0.0, al)[1]), (lambda x: k(x, 0.0, al)[2])


def upper_fold(model: FilippovModel, center: float, al: tuple) -> float:
    g, _, _ = _g_on_sigma(model, al)
    return root_near(g, center, UNFOLD_HALF_WIDTH * model.a)


def _outer_root(g, xc: float, d: float, direction: float, limit: float) -> float:
    """First sign change of g moving from xc in ``direction``, then brentq."""
    inner = xc
    step = d
    while True:
        outer = min(xc + direction * step, limit) if direction > 0 else max(xc + direction * step, limit)
        if g(outer) >= 0:
            lo, hi = sorted((inner, outer))
            return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if outer == limit:
            raise UnfoldingError("fold pair around the cusp not found")
        inner = outer
        step *= 2.0


def _critical_point(gx, gxx, x0: float, hw: float) -> float:
    x = x0
    for _ in range(30):
        d = gxx(x)
        if d == 0.0 or not math.isfinite(d):
            break
        step = gx(x) / d
        x -= step
        if abs(x - x0) > hw:
            break
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            return x
    return root_near(gx, x0, hw)


def cusp_geometry(model: FilippovModel, al: tuple) -> tuple[float, float, list[float], float]:
    """(phi1, xi1, roots, xc) from the fold structure of g near (-a, 0)."""
    a = model.a
    g, gx, gxx = _g_on_sigma(model, al)
    hw = UNFOLD_HALF_WIDTH * a
    xc = _critical_point(gx, gxx, -a, hw)
    gc = g(xc)
    if gc < 0:
        c2 = gxx(xc)
        d = math.sqrt(-2.0 * gc / c2) if c2 > 0 else hw / 64
        d = min(max(1.5 * d, 1e-12), hw)
        xm = _outer_root(g, xc, d, -1.0, -a - hw)
        xp = _outer_root(g, xc, d, 1.0, -a + hw)
        return ((xp - xm) / 2) ** 2, -(xp + xm) / 2, [xm, xp], xc
    if gc == 0:
        return 0.0, -xc, [xc], xc
    # no roots: report phi1 through the depth of the minimum of g
    return -2.0 * gc / gxx(xc), -xc, [], xc


def varpi(model: FilippovModel, al: tuple) -> float:
    """Pseudo-equilibrium of the sliding field near (a, 0)."""
    a = model.a
    return root_near(lambda x: sliding_function(model, x, al), a, UNFOLD_HALF_WIDTH * a)


def t2_critical_point(model: FilippovModel, al: tuple, x0: float, cfg=maps.DEFAULT_CONFIG) -> float:
    """Critical point of T2 near (-a, 0), by secant on the analytic T2_x."""
    fn = lambda x: maps.map_T2_dx(model, x, al, cfg)[1]  # noqa: E731
    return secant(fn, x0, x0 + 1e-3 * model.a, tol=1e-13, maxiter=40)


def measured_unfolding(model: FilippovModel, case: str, alpha: Sequence[float],
                       cfg: maps.MapConfig = maps.DEFAULT_CONFIG) -> MeasuredUnfolding:
    al = _alpha(alpha, model.m)
    a = model.a
    mu = MeasuredUnfolding(case, list(al))
    if case == "codim1":
        fold = upper_fold(model, -a, al)
        rho_1 = -fold
        fn = lambda x: maps.map_T1_dx(model, x, al, cfg)  # noqa: E731
        try:
            rho_2 = _newton(fn, -a, lo=-a - 0.5 * cfg.window * a, hi=-a + 0.5 * cfg.window * a)
        except RootError as exc:
            raise UnfoldingError(f"no zero of T1 near -a: {exc}") from None
        mu.rho1 = -rho_1 - rho_2
        mu.folds = {"fold": fold, "T1_zero": rho_2}
        return mu
    if case == "cusp":
        phi1, xi1, roots, xc = cusp_geometry(model, al)
        mu.phi1, mu.xi1 = phi1, xi1
        mu.phi2 = maps.map_T1(model, -xi1, al, cfg)
        mu.folds = {"critical": xc}
        if len(roots) == 2:
            xm, xp = roots
            mu.folds.update({"invisible": xm, "visible": xp})
            mu.varsigma = -maps.backward_fold_map(model, xp, al, cfg)
        return mu
    if case == "foldfold":
        t_lo = upper_fold(model, -a, al)  # T_u^- = (-vartheta1^-, 0)
        t_hi = upper_fold(model, a, al)  # T_u^+ = (vartheta1^+, 0)
        v1m, v1p = -t_lo, t_hi
        mu.phi1 = -v1m + v1p
        mu.folds = {"vartheta1_minus": v1m, "vartheta1_plus": v1p}
        try:
            mu.varpi = varpi(model, al)
        except RootError:
            mu.varpi = None
        xs = t2_critical_point(model, al, -0.5 * (v1m + v1p), cfg)
        h = cfg.fd_step2
        T2x_p = maps.map_T2_dx(model, xs + h, al, cfg)[1]
        T2x_m = maps.map_T2_dx(model, xs - h, al, cfg)[1]
        T2xx = (T2x_p - T2x_m) / (2 * h)
        mu.x_star = xs
        mu.phi2_hat = -2.0 * maps.map_T2(model, xs, al, cfg) / T2xx
        return mu
    raise ValueError(f"case must be one of {CASES}")


def _newton(fn, x0, lo, hi):
    from .roots import safeguarded_newton

    return safeguarded_newton(fn, lo, hi, x0, tol=1e-14, maxiter=50)


# ----------------------------------------------------------- xi functions


@dataclass(frozen=True)
class XiValues:
    xi2: float
    xi3: float
    xi3_tilde: float


def xi_functions(model: FilippovModel, z: float, alpha: Sequence[float], nodes: int = 6,
                 cfg: maps.MapConfig = maps.DEFAULT_CONFIG) -> XiValues:
    """Correction functions of the cusp curves at chord half-width z >= 0.

    xi2 is the mean slope of sigma over the chord [-xi1, z - xi1]
    (Gauss-Legendre on the Liouville slope); xi3 comes from the backward
    fold map P through the second-order remainder of P on the fold band.
    """
    al = _alpha(alpha, model.m)
    phi1, xi1, roots, _ = cusp_geometry(model, al)
    z = float(z)
    if z < 0:
        raise ValueError("z must be non-negative")
    if z == 0:
        xi2 = maps.sigma_full_dx(model, -xi1, al, cfg)[1]
        return XiValues(xi2, -xi2, 0.0)
    t, w = leggauss(nodes)
    s = 0.5 * (t + 1.0)
    xi2 = float(sum(wi * 0.5 * maps.sigma_full_dx(model, si * z - xi1, al, cfg)[1] for si, wi in zip(s, w)))
    if len(roots) != 2 or z > math.sqrt(phi1) * (1 + 1e-12):
        raise maps.MapDomainError("xi3 needs 0 < z <= sqrt(phi1) inside the fold band")
    root = math.sqrt(phi1)
    if abs(z - root) <= 1e-12 * max(1.0, root):
        # the band ends are fixed points of P with slope -1 at the invisible fold
        p_right = maps.backward_fold_map(model, roots[1], al, cfg)
        xi3t = -(p_right + 3 * z + xi1) / z
    else:
        P = lambda x: maps.backward_fold_map(model, x, al, cfg)  # noqa: E731
        x_l = -z - xi1
        h = min(cfg.fd_step1, 0.25 * (root - z))
        Px = (P(x_l + h) - P(x_l - h)) / (2 * h)
        xi3t = -(P(z - xi1) - P(x_l) - 2 * z * Px) / z
    return XiValues(xi2, xi3t - xi2, xi3t)
