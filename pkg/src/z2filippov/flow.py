"""Event-driven integration of the piecewise-smooth system.

Smooth arcs are integrated with scipy's DOP853 (an embedded Runge-Kutta pair
of order 8 with dense output).  Lower arcs are obtained from upper arcs of
the reflected start point, so the Z2 symmetry of computed flows is exact up
to the sign flip.  Optional co-integrated quantities:

* ``div``:         J(t) = int_0^t div(Z+) ds
* ``kappa``:       K_i(t) = int_0^t exp(-J) (f g_ai - g f_ai) ds
* ``variational``: fundamental matrix Phi, parameter sensitivities w_i,
                   and the gradient-of-divergence integrals used for second
                   derivatives of transition maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import DOP853, OdeSolution, solve_ivp
from scipy.optimize import brentq

from .model import FilippovModel, _alpha


class IntegrationError(RuntimeError):
    pass


class EventNotFound(IntegrationError):
    pass


class NonUniqueFlowError(RuntimeError):
    """Forward Filippov flow is not unique (unstable sliding onset)."""


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    t_max: float = 50.0
    max_step: float = math.inf
    liftoff_step: float = 1e-4
    tangency_tol: float = 1e-11
    boundary_tol: float = 1e-10


DEFAULT_OPTIONS = IntegratorOptions()
# transition maps need more headroom than plain simulation
MAP_OPTIONS = IntegratorOptions(rtol=1e-12, atol=1e-14)


@dataclass
class Arc:
    regime: str
    t0: float
    t1: float
    ts: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    event: str
    state: np.ndarray  # augmented end state
    sol: Callable | None = None
    layout: dict = field(default_factory=dict)

    @property
    def end(self) -> tuple[float, float]:
        return float(self.xs[-1]), float(self.ys[-1])

    @property
    def start(self) -> tuple[float, float]:
        return float(self.xs[0]), float(self.ys[0])

    def part(self, name: str) -> np.ndarray:
        sl = self.layout[name]
        return self.state[sl]

    @property
    def Phi(self) -> np.ndarray | None:
        if "Phi" not in self.layout:
            return None
        return self.part("Phi").reshape(2, 2, order="F")

    @property
    def sens(self) -> np.ndarray | None:
        if "w" not in self.layout:
            return None
        return self.part("w").reshape(2, -1, order="F")


# -------------------------------------------------------------- rhs builders


def _layout(m: int, div: bool, kappa: bool, variational: bool) -> tuple[dict, int]:
    lay = {}
    n = 2
    if div or kappa or variational:
        lay["J"] = slice(n, n + 1)
        n += 1
    if kappa:
        lay["K"] = slice(n, n + m)
        n += m
    if variational:
        lay["Phi"] = slice(n, n + 4)
        n += 4
        lay["w"] = slice(n, n + 2 * m)
        n += 2 * m
        lay["Lx"] = slice(n, n + 1)
        n += 1
        lay["La"] = slice(n, n + m)
        n += m
    return lay, n


def _make_rhs(model: FilippovModel, al: tuple, div: bool, kappa: bool, variational: bool):
    m = model.m
    if not (div or kappa or variational):
        k = model.kernel("f", "g")

        def rhs(t, u):
            return k(float(u[0]), float(u[1]), al)

        return rhs

    if not (kappa or variational):
        k = model.kernel("f", "g", "div")

        def rhs(t, u):
            return k(float(u[0]), float(u[1]), al)

        return rhs

    names = ["f", "g", "div"]
    names += [f"f_a{i + 1}" for i in range(m)] + [f"g_a{i + 1}" for i in range(m)]
    if variational:
        names += ["f_x", "f_y", "g_x", "g_y", "div_x", "div_y"]
        names += [f"div_a{i + 1}" for i in range(m)]
    k = model.kernel(*names)
    lay, n = _layout(m, div, kappa, variational)

    def rhs(t, u):
        v = k(float(u[0]), float(u[1]), al)
        f, g, dv = v[0], v[1], v[2]
        fa = v[3 : 3 + m]
        ga = v[3 + m : 3 + 2 * m]
        out = np.empty(n)
        out[0] = f
        out[1] = g
        out[2] = dv
        if kappa:
            e = math.exp(-u[2])
            for i in range(m):
                out[lay["K"].start + i] = e * (f * ga[i] - g * fa[i])
        if variational:
            b = 3 + 2 * m
            fx, fy, gx, gy, dx, dy = v[b : b + 6]
            da = v[b + 6 : b + 6 + m]
            p = lay["Phi"].start
            p11, p21, p12, p22 = u[p : p + 4]
            out[p] = fx * p11 + fy * p21
            out[p + 1] = gx * p11 + gy * p21
            out[p + 2] = fx * p12 + fy * p22
            out[p + 3] = gx * p12 + gy * p22
            q = lay["w"].start
            la = lay["La"].start
            for i in range(m):
                w1, w2 = u[q + 2 * i], u[q + 2 * i + 1]
                out[q + 2 * i] = fx * w1 + fy * w2 + fa[i]
                out[q + 2 * i + 1] = gx * w1 + gy * w2 + ga[i]
                out[la + i] = dx * w1 + dy * w2 + da[i]
            out[lay["Lx"].start] = dx * p11 + dy * p21
        return out

    return rhs


def _initial_state(start, m, div, kappa, variational) -> tuple[np.ndarray, dict]:
    lay, n = _layout(m, div, kappa, variational)
    u0 = np.zeros(n)
    u0[0], u0[1] = start
    if variational:
        p = lay["Phi"].start
        u0[p] = 1.0
        u0[p + 3] = 1.0
    return u0, lay


# ---------------------------------------------------------------- liftoff


def liftoff_point(model: FilippovModel, x: float, y: float, al: tuple, h: float) -> tuple[float, float]:
    """Third-order Taylor step of the upper flow from (x, y) over time h."""
    f, g, lf, lg, llf, llg = model.kernel("f", "g", "Lf", "Lg", "LLf", "LLg")(x, y, al)
    h2 = h * h / 2.0
    h3 = h * h * h / 6.0
    return x + h * f + h2 * lf + h3 * llf, y + h * g + h2 * lg + h3 * llg


# ------------------------------------------------------------------ arcs


@dataclass
class _Run:
    t: np.ndarray
    y: np.ndarray
    status: int
    t_events: list
    y_events: list
    sol: OdeSolution | None
    message: str = ""


def _scan_step(events, interp, ta, tb, prev, samples, graze=1e-12):
    """Earliest terminal event inside one step, or None.

    The event functions are sampled at ``samples`` points of the step and
    their slopes are estimated from the interpolant, so an excursion
    across an event surface that starts and ends between two samples (a
    grazing orbit near a fold) shows up as a local extremum and is checked.
    Dips shallower than ``graze`` count as tangential touches, not crossings.
    """
    grid = np.linspace(ta, tb, samples + 1)
    eps = 1e-7 * abs(tb - ta)
    U = interp(np.concatenate([grid, grid + eps, grid - eps]))
    n = len(grid)
    best = None
    for k, ev in enumerate(events):
        d = getattr(ev, "direction", 0.0)
        v = np.array([ev(grid[j], U[:, j]) for j in range(n)])
        v[0] = prev[k]
        dv = np.array([ev(grid[j], U[:, n + j]) - ev(grid[j], U[:, 2 * n + j]) for j in range(n)])
        dv *= np.sign(tb - ta)
        fn = lambda t, k=k: events[k](t, interp(t))  # noqa: E731
        for j in range(1, n):
            lo, hi, a_, b_ = grid[j - 1], grid[j], v[j - 1], v[j]
            if best is not None and abs(lo - ta) >= abs(best[0] - ta):
                break
            te = None
            slope = lambda t, k=k: events[k](t + eps, interp(t + eps)) - events[k](t - eps, interp(t - eps))  # noqa: E731
            if a_ == 0:
                # starting on the surface: only a return after leaving counts
                a_ = float(np.sign(dv[j - 1]))
                if a_ == 0 or (a_ > 0) == (b_ > 0):
                    continue
                try:
                    lo = brentq(slope, lo, hi, xtol=1e-15)
                except ValueError:
                    continue
            up, down = a_ < 0 <= b_, a_ > 0 >= b_
            if (d > 0 and up) or (d < 0 and down) or (d == 0 and (up or down)):
                te = hi if b_ == 0 else brentq(fn, lo, hi, xtol=1e-15, rtol=1e-15)
            elif (dv[j - 1] * dv[j] < 0 and (a_ > 0) == (b_ > 0)
                  and (d == 0 or (d < 0) == (dv[j - 1] < 0))):
                # interior extremum: look for a hidden pair of crossings; only a
                # minimum can hide a downward one and only a maximum an upward one
                try:
                    tm = brentq(slope, lo, hi, xtol=1e-15)
                except ValueError:
                    continue
                vm = fn(tm)
                first_down = a_ > 0 and vm < -graze
                first_up = a_ < 0 and vm > graze
                if (d < 0 and first_down) or (d > 0 and first_up) or (d == 0 and (first_up or first_down)):
                    te = brentq(fn, lo, tm, xtol=1e-15, rtol=1e-15)
            if te is not None:
                if best is None or abs(te - ta) < abs(best[0] - ta):
                    best = (te, k)
                break
    return best, [ev(tb, U[:, n - 1]) for ev in events]


def _integrate(rhs, t0, t1, u0, opts, events, dense, samples=8) -> _Run:
    """DOP853 with terminal events located from the dense output of each step."""
    solver = DOP853(rhs, t0, np.asarray(u0, float), t1, rtol=opts.rtol, atol=opts.atol,
                    max_step=opts.max_step)
    ts, ys, interps = [t0], [solver.y.copy()], []
    prev = [ev(t0, solver.y) for ev in events]
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            return _Run(np.array(ts), np.array(ys).T, -1, [], [], None, str(msg))
        interp = solver.dense_output()
        interps.append(interp)
        hit = None
        if events:
            hit, prev = _scan_step(events, interp, solver.t_old, solver.t, prev, samples)
        if hit is not None:
            te, k = hit
            ue = interp(te)
            ts.append(te)
            ys.append(ue)
            t_events = [[] for _ in events]
            y_events = [np.empty((0, len(ue))) for _ in events]
            t_events[k] = [te]
            y_events[k] = np.array([ue])
            sol = OdeSolution(np.array(ts), interps) if dense else None
            return _Run(np.array(ts), np.array(ys).T, 1, t_events, y_events, sol)
        ts.append(solver.t)
        ys.append(solver.y.copy())
    sol = OdeSolution(np.array(ts), interps) if dense else None
    return _Run(np.array(ts), np.array(ys).T, 0, [[] for _ in events], [[] for _ in events], sol)


def _upper_arc(
    model: FilippovModel,
    start: tuple[float, float],
    al: tuple,
    direction: str,
    stop: str,
    opts: IntegratorOptions,
    *,
    section: tuple[float, int] | None = None,
    arm_x: float | None = None,
    t_max: float | None = None,
    div: bool = False,
    kappa: bool = False,
    variational: bool = False,
    dense: bool = False,
    extra_events: Sequence[Callable] = (),
    regime: str = "upper",
    allow_timeout: bool = False,
) -> Arc:
    sgn = 1.0 if direction == "fwd" else -1.0
    horizon = opts.t_max if t_max is None else t_max
    x0, y0 = float(start[0]), float(start[1])
    t_start = 0.0
    u0, lay = _initial_state((x0, y0), model.m, div, kappa, variational)

    if stop == "boundary" and abs(y0) <= opts.boundary_tol and not (kappa or variational):
        g0 = model.kernel("g")(x0, y0, al)[0]
        if abs(g0) < opts.tangency_tol:
            h = sgn * opts.liftoff_step
            x1, y1 = liftoff_point(model, x0, y0, al, h)
            if y1 <= 0.0:
                # the orbit leaves into y < 0 at once: zero-length upper arc
                return Arc(regime, 0.0, 0.0, np.array([0.0]), np.array([x0]), np.array([y0]),
                           "boundary-hit", u0, None, lay)
            u0[0], u0[1] = x1, y1
            if div:
                dk = model.kernel("div")
                u0[2] = 0.5 * h * (dk(x0, y0, al)[0] + dk(x1, y1, al)[0])
            t_start = h

    events = []
    if stop == "boundary":
        if arm_x is None:
            ev = lambda t, u: u[1]  # noqa: E731
        else:
            # only armed on the far side of x = arm_x, so a start on the
            # boundary cannot trigger it
            ax = arm_x

            def ev(t, u):
                return u[1] if u[0] > ax else abs(u[1]) + 1.0

        ev.terminal = True
        ev.direction = -1.0
        events.append(ev)
    elif stop == "section":
        c, crossing = section

        def ev(t, u):
            return u[1] - c

        ev.terminal = True
        ev.direction = float(crossing)
        events.append(ev)
    elif stop != "time":
        raise ValueError(f"unknown stop condition {stop!r}")
    for e in extra_events:
        events.append(e)

    rhs = _make_rhs(model, al, div, kappa, variational)
    t_end = sgn * horizon
    if abs(t_end) <= abs(t_start):
        raise IntegrationError("time horizon shorter than liftoff step")
    res = _integrate(rhs, t_start, t_end, u0, opts, events, dense)
    if res.status == -1:
        raise IntegrationError(res.message)
    event = "time-out"
    end_state = res.y[:, -1]
    t_final = float(res.t[-1])
    if res.status == 1:
        for k, te in enumerate(res.t_events):
            if len(te):
                t_final = float(te[0])
                end_state = res.y_events[k][0].copy()
                if k == 0 and stop != "time":
                    event = "boundary-hit" if stop == "boundary" else "section-hit"
                else:
                    event = f"extra-{k}"
                break
        if event == "boundary-hit":
            end_state[1] = 0.0
        elif event == "section-hit":
            end_state[1] = section[0]
    elif stop != "time" and not allow_timeout:
        raise EventNotFound(f"no {stop} event before |t| = {horizon}")

    ts = np.concatenate([[0.0], res.t]) if t_start != 0.0 else np.asarray(res.t)
    xs = np.concatenate([[x0], res.y[0]]) if t_start != 0.0 else res.y[0].copy()
    ys = np.concatenate([[y0], res.y[1]]) if t_start != 0.0 else res.y[1].copy()
    if event != "time-out":
        keep = sgn * ts < sgn * t_final
        ts = np.append(ts[keep], t_final)
        xs = np.append(xs[keep], end_state[0])
        ys = np.append(ys[keep], end_state[1])
    return Arc(regime, 0.0, t_final, ts, xs, ys, event, end_state, res.sol, lay)


def _reflect_arc(arc: Arc) -> Arc:
    state = arc.state.copy()
    state[:2] = -state[:2]
    if "w" in arc.layout:
        state[arc.layout["w"]] *= -1.0
    sol = None
    if arc.sol is not None:
        inner = arc.sol

        def sol(t):
            v = np.array(inner(t), copy=True)
            v[:2] = -v[:2]
            return v

    return Arc("lower", arc.t0, arc.t1, arc.ts, -arc.xs, -arc.ys, arc.event, state, sol, arc.layout)


def integrate_arc(
    model: FilippovModel,
    regime: str,
    start: tuple[float, float],
    alpha: Sequence[float],
    direction: str = "fwd",
    stop: str = "boundary",
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    *,
    variational: bool = False,
    section: tuple[float, int] | None = None,
    t_max: float | None = None,
    dense: bool = True,
    allow_timeout: bool = False,
) -> Arc:
    """Integrate one smooth arc of the upper or lower subsystem.

    ``stop`` is ``boundary`` (first arrival at y = 0 from the arc's side),
    ``section`` (``section=(c, crossing)``, crossing +1/-1 in the stepping
    order) or ``time`` (run for ``t_max``).
    """
    al = _alpha(alpha, model.m)
    if direction not in ("fwd", "bwd"):
        raise ValueError("direction must be 'fwd' or 'bwd'")
    x, y = float(start[0]), float(start[1])
    if regime == "upper":
        if y < -opts.boundary_tol:
            raise ValueError("upper arc must start with y >= 0")
        return _upper_arc(model, (x, y), al, direction, stop, opts, section=section, t_max=t_max,
                          div=variational, variational=variational, dense=dense, allow_timeout=allow_timeout)
    if regime == "lower":
        if y > opts.boundary_tol:
            raise ValueError("lower arc must start with y <= 0")
        sec = None if section is None else (-section[0], -section[1])
        arc = _upper_arc(model, (-x, -y), al, direction, stop, opts, section=sec, t_max=t_max,
                         div=variational, variational=variational, dense=dense, allow_timeout=allow_timeout)
        return _reflect_arc(arc)
    raise ValueError(f"regime must be 'upper' or 'lower', got {regime!r}")


# ------------------------------------------------------- reference orbit


@dataclass
class ReferenceOrbit:
    """The upper orbit of the unperturbed model from (-a, 0) back to Sigma."""

    sol: Callable
    tau0: float
    end: tuple[float, float]
    y_max: float
    x_peak: float
    t_peak: float


def reference_orbit(model: FilippovModel, opts: IntegratorOptions = MAP_OPTIONS) -> ReferenceOrbit:
    """Shoot the upper field at alpha = 0 from (-a, 0) until it returns.

    The return is detected either as a transversal crossing of y = 0 in the
    right half-plane or, for a tangential return, as the crossing of x = a.
    """
    a = model.a
    al = model.alpha0()
    f_end = model.value("f", a, 0.0, al)

    def hit_x(t, u):
        return u[0] - a

    hit_x.terminal = True
    hit_x.direction = 1.0 if f_end >= 0 else -1.0

    arc = _upper_arc(model, (-a, 0.0), al, "fwd", "boundary", opts, arm_x=0.0, dense=True,
                     extra_events=(hit_x,))
    if arc.event == "boundary-hit":
        pass
    elif arc.event == "extra-1":
        # stopped at x = a before any transversal crossing
        arc.event = "section-hit"
    else:
        raise EventNotFound("reference orbit did not return to the boundary")
    t = np.linspace(0.0, arc.t1, 4001)
    pts = arc.sol(t)
    i = int(np.argmax(pts[1]))
    # refine the peak with the g = 0 crossing closest to the sampled maximum
    from scipy.optimize import brentq

    g = model.kernel("g")
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]
    gl = g(*arc.sol(lo)[:2], al)[0]
    gh = g(*arc.sol(hi)[:2], al)[0]
    if gl > 0 > gh:
        tp = brentq(lambda s: g(*arc.sol(s)[:2], al)[0], lo, hi, xtol=1e-14)
    else:
        tp = t[i]
    xp, yp = arc.sol(tp)[:2]
    return ReferenceOrbit(arc.sol, float(arc.t1), (float(arc.state[0]), float(arc.state[1])),
                          float(yp), float(xp), float(tp))


# ------------------------------------------------------------ Filippov flow


@dataclass
class Trajectory:
    arcs: list[Arc]
    events: list[tuple[str, float, float, float]]

    @property
    def end(self) -> tuple[float, float]:
        return self.arcs[-1].end

    @property
    def t_end(self) -> float:
        return self.arcs[-1].t1

    def boundary_points(self) -> list[tuple[float, float]]:
        """(t, x) of every arrival on the boundary."""
        return [(t, x) for kind, t, x, _ in self.events if kind in ("boundary-hit", "sliding-exit")]

    def samples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
        ts, xs, ys, reg = [], [], [], []
        for arc in self.arcs:
            ts.append(arc.ts)
            xs.append(arc.xs)
            ys.append(arc.ys)
            reg += [arc.regime] * len(arc.ts)
        return np.concatenate(ts), np.concatenate(xs), np.concatenate(ys), reg

    def to_csv(self) -> str:
        lines = ["t,x,y,regime"]
        for kind, t, x, y in self.events:
            lines.append(f"# event,{kind},{t!r},{x!r},{y!r}")
        t, x, y, reg = self.samples()
        for i in range(len(t)):
            lines.append(f"{t[i]!r},{x[i]!r},{y[i]!r},{reg[i]}")
        return "\n".join(lines) + "\n"


def _shift(arc: Arc, t0: float) -> Arc:
    return replace(arc, t0=arc.t0 + t0, t1=arc.t1 + t0, ts=arc.ts + t0)


def _sliding_arc(model, x0, al, t_budget, opts) -> Arc:
    from .boundary import sliding_velocity_fn

    v = sliding_velocity_fn(model, al)
    g = model.kernel("g")

    def rhs(t, u):
        return [v(float(u[0]))]

    def end_up(t, u):
        return g(float(u[0]), 0.0, al)[0]

    def end_lo(t, u):
        return g(-float(u[0]), 0.0, al)[0]

    # stable sliding has g(x,0) < 0 and g(-x,0) < 0; the segment ends where
    # either one rises through zero, so a tangent start cannot trigger them
    end_up.terminal = end_lo.terminal = True
    end_up.direction = end_lo.direction = 1.0
    res = solve_ivp(rhs, (0.0, t_budget), [x0], method="DOP853", rtol=opts.rtol, atol=opts.atol,
                    events=[end_up, end_lo], dense_output=False)
    if res.status == -1:
        raise IntegrationError(res.message)
    event = "time-out"
    ts, xs = res.t, res.y[0]
    if res.status == 1:
        for k in range(2):
            if len(res.t_events[k]):
                te = float(res.t_events[k][0])
                xe = float(res.y_events[k][0][0])
                keep = ts < te
                ts = np.append(ts[keep], te)
                xs = np.append(xs[keep], xe)
                event = "sliding-exit"
                break
    return Arc("sliding", 0.0, float(ts[-1]), ts, xs, np.zeros_like(xs), event,
               np.array([xs[-1], 0.0]), None, {})


def flow_filippov(
    model: FilippovModel,
    start: tuple[float, float],
    alpha: Sequence[float],
    t_max: float,
    opts: IntegratorOptions = DEFAULT_OPTIONS,
    max_arcs: int = 10000,
) -> Trajectory:
    """Forward Filippov solution from ``start`` up to time ``t_max``."""
    al = _alpha(alpha, model.m)
    x, y = float(start[0]), float(start[1])
    t = 0.0
    arcs: list[Arc] = []
    events: list[tuple[str, float, float, float]] = []
    came_from = None
    while t < t_max:
        if len(arcs) >= max_arcs:
            raise IntegrationError("too many arcs (possible chattering)")
        budget = t_max - t
        if abs(y) <= opts.boundary_tol:
            y = 0.0
            regime = _next_regime(model, x, al, came_from, opts)
            if regime in ("stop", "degenerate"):
                events.append(("higher-degenerate" if regime == "degenerate" else "ambiguous", t, x, 0.0))
                break
        else:
            regime = "upper" if y > 0 else "lower"
        if regime == "sliding":
            arc = _sliding_arc(model, x, al, budget, opts)
        else:
            arc = integrate_arc(model, regime, (x, y), al, "fwd", "boundary", opts, t_max=budget,
                                 allow_timeout=True)
        if arc.t1 == 0.0 and arc.event != "time-out":
            raise IntegrationError(f"zero-length {arc.regime} arc at x={x}")
        arc = _shift(arc, t)
        arcs.append(arc)
        t = arc.t1
        x, y = arc.end
        if arc.event in ("boundary-hit", "sliding-exit"):
            events.append((arc.event, t, x, 0.0))
            came_from = arc.regime
        elif arc.event == "time-out":
            events.append(("time-out", t, x, y))
            break
    if not arcs:
        arcs.append(Arc("upper" if y >= 0 else "lower", 0.0, 0.0, np.array([0.0]), np.array([x]),
                        np.array([y]), "time-out", np.array([x, y]), None, {}))
    return Trajectory(arcs, events)


def _next_regime(model, x, al, came_from, opts) -> str:
    from .boundary import BoundaryClass as B
    from .boundary import classify_point, lie_data, sliding_velocity

    cls = classify_point(model, x, al)
    if cls is B.CROSSING_UP:
        return "upper"
    if cls is B.CROSSING_DOWN:
        return "lower"
    if cls is B.SLIDING_STABLE:
        return "sliding"
    if cls is B.SLIDING_UNSTABLE:
        raise NonUniqueFlowError(f"forward flow from unstable sliding point x={x} is not unique")
    if cls in (B.HIGHER_DEGENERATE, B.BOUNDARY_EQUILIBRIUM):
        return "degenerate"
    d = lie_data(model, x, al)
    up_exit = d.Z2ph > 0 if cls in (B.UPPER_FOLD_VISIBLE, B.UPPER_FOLD_INVISIBLE) or cls.is_foldfold else d.Z3ph > 0
    lo_exit = d.Z2mh < 0 if cls in (B.LOWER_FOLD_VISIBLE, B.LOWER_FOLD_INVISIBLE) or cls.is_foldfold else d.Z3mh < 0
    if cls.is_foldfold:
        if up_exit and lo_exit:
            return "lower" if came_from == "upper" else "upper"
        if up_exit:
            return "upper"
        if lo_exit:
            return "lower"
        return "stop"
    if cls.is_upper_tangency:
        if up_exit:
            return "upper"
        if d.Zmh < 0:
            return "lower"
        speed = d.f_plus
    else:
        if lo_exit:
            return "lower"
        if d.Zph > 0:
            return "upper"
        speed = d.f_minus
    # tangency bordering a sliding segment: slide if the motion enters it
    step = 1e-7 * max(1.0, abs(x))
    nxt = classify_point(model, x + math.copysign(step, speed), al)
    if nxt is B.SLIDING_STABLE:
        return "sliding"
    return "stop"
