"""Scalar root finding helpers built on scipy.optimize."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import brentq


class RootError(RuntimeError):
    pass


def bracketed_roots(fn: Callable[[float], float], lo: float, hi: float, n: int = 200,
                    xtol: float = 1e-15) -> list[float]:
    """All sign-change roots of ``fn`` on [lo, hi] found on an n-point grid."""
    xs = np.linspace(lo, hi, n + 1)
    vs = [fn(float(x)) for x in xs]
    roots = []
    for i in range(n):
        a, b = vs[i], vs[i + 1]
        if a == 0.0:
            roots.append(float(xs[i]))
        elif (a < 0) != (b < 0) and b != 0.0:  # sign test, a * b can underflow
            roots.append(brentq(fn, xs[i], xs[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    if vs[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def root_near(fn: Callable[[float], float], x0: float, half_width: float,
              n: int = 64, xtol: float = 1e-15) -> float:
    """The root of ``fn`` in [x0 - w, x0 + w] closest to ``x0``."""
    roots = bracketed_roots(fn, x0 - half_width, x0 + half_width, n, xtol)
    if not roots:
        raise RootError(f"no sign change within {half_width} of {x0}")
    return min(roots, key=lambda r: abs(r - x0))


def secant(fn: Callable[[float], float], x0: float, x1: float, tol: float = 1e-13,
           maxiter: int = 50, f0: float | None = None) -> float:
    """Plain secant iteration; raises when it fails to converge."""
    f0 = fn(x0) if f0 is None else f0
    f1 = fn(x1)
    for _ in range(maxiter):
        if f1 == 0.0:
            return x1
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not math.isfinite(x2):
            break
        x0, f0 = x1, f1
        x1 = x2
        if abs(x1 - x0) <= tol * max(1.0, abs(x1)):
            return x1
        f1 = fn(x1)
    raise RootError("secant iteration did not converge")


def safeguarded_newton(fn: Callable[[float], tuple[float, float]], lo: float, hi: float,
                       x0: float | None = None, tol: float = 1e-14, maxiter: int = 60) -> float:
    """Newton's method kept inside a shrinking sign-change bracket.

    ``fn`` returns (value, derivative).  Falls back to bisection whenever the
    Newton step leaves the bracket.
    """
    flo = fn(lo)[0]
    fhi = fn(hi)[0]
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo < 0) == (fhi < 0):
        raise RootError("interval does not bracket a root")
    x = 0.5 * (lo + hi) if x0 is None else x0
    for _ in range(maxiter):
        v, d = fn(x)
        if v == 0.0:
            return x
        if (v < 0) == (flo < 0):
            lo, flo = x, v
        else:
            hi = x
        step_ok = d != 0.0 and math.isfinite(d)
        xn = x - v / d if step_ok else 0.5 * (lo + hi)
        if not (min(lo, hi) < xn < max(lo, hi)):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    return x


def newton_from(fn: Callable[[float], tuple[float, float]], x0: float, lo: float, hi: float,
                first: tuple[float, float] | None = None, tol: float = 1e-14,
                ftol: float = 1e-14, maxiter: int = 40) -> tuple[float, float]:
    """Newton's method from ``x0`` confined to [lo, hi], no bracket required.

    Returns (root, derivative at the root).  A step that leaves the interval
    is halved back toward the current iterate; sign changes seen along the
    way are kept as a bracket and used for bisection when Newton stalls.
    """
    x = float(x0)
    v, d = fn(x) if first is None else first
    a = b = None  # bracket ends with opposite signs, once known
    for _ in range(maxiter):
        if abs(v) <= ftol:
            return x, d
        if a is not None and (v < 0) == (a[1] < 0):
            a = (x, v)
        elif b is not None and (v < 0) == (b[1] < 0):
            b = (x, v)
        step = -v / d if d != 0.0 and math.isfinite(d) else math.nan
        xn = x + step if math.isfinite(step) else math.nan
        if a is not None and b is not None and not (min(a[0], b[0]) < xn < max(a[0], b[0])):
            xn = 0.5 * (a[0] + b[0])
        elif not math.isfinite(xn):
            raise RootError("zero derivative in Newton iteration")
        else:
            while not (lo <= xn <= hi):
                xn = 0.5 * (x + xn)
                if abs(xn - x) < tol:
                    raise RootError("Newton iteration pinned at the interval end")
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            vn, dn = fn(xn)
            return xn, dn
        vn, dn = fn(xn)
        if a is None and b is None and (vn < 0) != (v < 0):
            a, b = (x, v), (xn, vn)
        x, v, d = xn, vn, dn
    raise RootError("Newton iteration did not converge")
