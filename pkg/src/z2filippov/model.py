"""Z2-symmetric Filippov models with the x-axis as switching line.

Only the upper field (f+, g+) is stored.  The lower field is always obtained
by the reflection (x, y) -> (-x, -y):  Z-(x, y) = -Z+(-x, -y).
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import exprs
from .exprs import Expr, parse_expr

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CASES = ("codim1", "cusp", "foldfold")

_SUFFIX = re.compile(r"x|y|a[1-9][0-9]*")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class FilippovModel:
    f_plus: Expr
    g_plus: Expr
    m: int
    a: float
    label: str = ""

    def __post_init__(self):
        if self.m < 0:
            raise ModelError("parameter arity must be non-negative")
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ModelError(f"reference abscissa a must be positive, got {self.a}")
        exprs.check_arity(self.f_plus, self.m)
        exprs.check_arity(self.g_plus, self.m)

    # compiled closures hold code objects; keep them out of pickles so models
    # can be shipped to worker processes
    def __getstate__(self):
        return {k: getattr(self, k) for k in ("f_plus", "g_plus", "m", "a", "label")}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)

    @cached_property
    def _symbols(self) -> dict[str, Expr]:
        return {}

    @cached_property
    def _kernels(self) -> dict[tuple[str, ...], Callable]:
        return {}

    def lie(self, e: Expr) -> Expr:
        """Lie derivative of ``e`` along the upper field: f e_x + g e_y."""
        d = exprs.diff_expr
        return exprs._add(
            exprs._mul(self.f_plus, d(e, 0)), exprs._mul(self.g_plus, d(e, 1))
        )

    def expr(self, name: str) -> Expr:
        """Named symbolic quantity of the upper field.

        Base names are ``f``, ``g``, ``div`` (f_x + g_y), ``Lg`` and ``LLg``
        (second and third Lie derivatives of h = y), ``Lf`` and ``LLf``.  An
        optional suffix after an underscore lists partial derivatives, e.g.
        ``g_xa1`` or ``div_y``.
        """
        cache = self._symbols
        if name in cache:
            return cache[name]
        base, _, suffix = name.partition("_")
        if suffix:
            parts = _SUFFIX.findall(suffix)
            if "".join(parts) != suffix:
                raise ModelError(f"bad derivative suffix in {name!r}")
            e = self.expr(base)
            for p in parts:
                idx = exprs.var_index(p)
                if idx >= self.m + 2:
                    raise exprs.ArityError(f"{p} exceeds arity m={self.m}")
                e = exprs.diff_expr(e, idx)
        elif base == "f":
            e = self.f_plus
        elif base == "g":
            e = self.g_plus
        elif base == "div":
            e = exprs._add(exprs.diff_expr(self.f_plus, 0), exprs.diff_expr(self.g_plus, 1))
        elif base in ("Lg", "Lf"):
            e = self.lie(self.expr(base[1:]))
        elif base in ("LLg", "LLf"):
            e = self.lie(self.expr(base[1:]))
        else:
            raise ModelError(f"unknown quantity {name!r}")
        cache[name] = e
        return e

    def kernel(self, *names: str) -> Callable[[float, float, Sequence[float]], tuple]:
        """Compiled closure returning the named quantities at (x, y; alpha)."""
        cache = self._kernels
        if names not in cache:
            cache[names] = exprs.compile_exprs([self.expr(n) for n in names], self.m)
        return cache[names]

    def value(self, name: str, x: float, y: float, alpha: Sequence[float]) -> float:
        return self.kernel(name)(float(x), float(y), _alpha(alpha, self.m))[0]

    def alpha0(self) -> tuple[float, ...]:
        return (0.0,) * self.m

    def describe(self) -> dict:
        return {
            "label": self.label,
            "a": self.a,
            "m": self.m,
            "f_plus": exprs.to_string(self.f_plus),
            "g_plus": exprs.to_string(self.g_plus),
        }

    def fingerprint(self) -> str:
        import hashlib

        text = repr(sorted(self.describe().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _alpha(alpha: Sequence[float], m: int) -> tuple[float, ...]:
    t = tuple(float(v) for v in alpha)
    if len(t) != m:
        raise exprs.ArityError(f"expected {m} parameter values, got {len(t)}")
    return t


def build_model(f_plus: Expr | str, g_plus: Expr | str, m: int, a: float, label: str = "") -> FilippovModel:
    if isinstance(f_plus, str):
        f_plus = parse_expr(f_plus, m)
    if isinstance(g_plus, str):
        g_plus = parse_expr(g_plus, m)
    return FilippovModel(f_plus, g_plus, int(m), float(a), label)


def eval_field(model: FilippovModel, side: str, x: float, y: float, alpha: Sequence[float]) -> tuple[float, float]:
    al = _alpha(alpha, model.m)
    k = model.kernel("f", "g")
    if side == "upper":
        return k(float(x), float(y), al)
    if side == "lower":
        f, g = k(-float(x), -float(y), al)
        return -f, -g
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


# ------------------------------------------------------------- scenarios

C_STAR = (math.exp(2.0) - 7.0) / 2.0

SCENARIOS = {
    "s1": dict(
        f_plus="1",
        g_plus="-(x+1)*(x-1/3) + a1 + a2*(x+1)",
        case="codim1",
        label="S1: regular-fold critical crossing cycle",
    ),
    "s2": dict(
        f_plus="1",
        g_plus="(x+1)^2*(1/2 - x) + a1 + a2*(x+1)",
        case="cusp",
        label="S2: regular-cusp critical crossing cycle",
    ),
    "s3": dict(
        f_plus="1",
        g_plus="x^3 - x + ((exp(2)-7)/2)*(x^2-1) + y + a1 + a2*x",
        case="foldfold",
        label="S3: fold-fold critical crossing cycle",
    ),
}


def load_scenario(name: str) -> FilippovModel:
    key = name.lower()
    if key not in SCENARIOS:
        raise ModelError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    s = SCENARIOS[key]
    return build_model(s["f_plus"], s["g_plus"], 2, 1.0, s["label"])


def scenario_case(name: str) -> str:
    return SCENARIOS[name.lower()]["case"]


def load_model_file(path: str | Path) -> FilippovModel:
    """Read a model from a ``key = value`` text file (TOML subset)."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    missing = {"a", "m", "f_plus", "g_plus"} - set(data)
    if missing:
        raise ModelError(f"model file lacks keys {sorted(missing)}")
    return build_model(
        str(data["f_plus"]), str(data["g_plus"]), int(data["m"]), float(data["a"]), str(data.get("label", ""))
    )


def dump_model_file(model: FilippovModel) -> str:
    d = model.describe()
    return (
        f"a = {d['a']!r}\nm = {d['m']}\n"
        f"f_plus = \"{d['f_plus']}\"\ng_plus = \"{d['g_plus']}\"\n"
        f"label = \"{d['label']}\"\n"
    )


# ------------------------------------------------------------ hypotheses


@dataclass(frozen=True)
class HypothesisTolerances:
    landing_tol: float = 1e-8
    tangency_tol: float = 1e-11
    endpoint_exempt: float = 1e-3
    samples: int = 2000
    degeneracy_tol: float = 1e-9


@dataclass
class Check:
    holds: bool
    witness: dict = field(default_factory=dict)


@dataclass
class H0Check:
    holds: bool
    landing_error: float
    min_interior_y: float
    tau0: float


@dataclass
class HypothesisReport:
    case: str
    h0: H0Check
    h1: Check | None = None
    h1_prime: Check | None = None
    h2: Check | None = None
    h2_prime: Check | None = None
    h3: Check | None = None
    nondegeneracy: Check | None = None
    violations: list[str] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        out = {"case": self.case, "holds": self.holds, "violations": list(self.violations)}
        out["h0"] = dict(vars(self.h0))
        for k in ("h1", "h1_prime", "h2", "h2_prime", "h3", "nondegeneracy"):
            c = getattr(self, k)
            out[k] = None if c is None else {"holds": c.holds, **c.witness}
        return out


def check_h0(model: FilippovModel, tol: HypothesisTolerances = HypothesisTolerances()) -> H0Check:
    from .flow import reference_orbit

    try:
        orbit = reference_orbit(model)
    except Exception:  # integration failure means the orbit does not close
        return H0Check(False, math.inf, -math.inf, math.nan)
    a = model.a
    landing = math.hypot(orbit.end[0] - a, orbit.end[1])
    ts = np.linspace(0.0, orbit.tau0, max(tol.samples, 1000))
    pts = orbit.sol(ts)
    xs, ys = pts[0], pts[1]
    d = np.minimum(np.hypot(xs + a, ys), np.hypot(xs - a, ys))
    interior = d > tol.endpoint_exempt
    min_y = float(ys[interior].min()) if interior.any() else -math.inf
    holds = landing < tol.landing_tol and min_y > 0 and orbit.tau0 > 0
    return H0Check(bool(holds), float(landing), min_y, float(orbit.tau0))


def check_hypotheses(
    model: FilippovModel, case: str, tolerances: HypothesisTolerances = HypothesisTolerances()
) -> HypothesisReport:
    """Check (H0)-(H3) and the nondegeneracy condition for ``case``."""
    if case not in CASES:
        raise ValueError(f"case must be one of {CASES}")
    tol = tolerances
    a = model.a
    z = model.alpha0()
    v = lambda name, x: model.value(name, x, 0.0, z)  # noqa: E731
    rep = HypothesisReport(case=case, h0=check_h0(model, tol))
    if not rep.h0.holds:
        rep.violations.append("H0: upper orbit from (-a,0) does not close at (a,0) inside y>0")

    f_l, g_l, gx_l, gxx_l = v("f", -a), v("g", -a), v("g_x", -a), v("g_xx", -a)
    f_r, g_r, gx_r = v("f", a), v("g", a), v("g_x", a)

    if case in ("codim1", "foldfold"):
        ok = abs(g_l) < tol.tangency_tol and f_l * gx_l > 0
        rep.h1 = Check(ok, {"g(-a,0)": g_l, "f*g_x(-a,0)": f_l * gx_l})
        if not ok:
            rep.violations.append("H1: (-a,0) is not a fold with f*g_x > 0")
    else:
        ok = f_l != 0 and abs(g_l) < tol.tangency_tol and abs(gx_l) < tol.degeneracy_tol and gxx_l > 0
        rep.h1_prime = Check(ok, {"f(-a,0)": f_l, "g(-a,0)": g_l, "g_x(-a,0)": gx_l, "g_xx(-a,0)": gxx_l})
        if not ok:
            rep.violations.append("H1': (-a,0) is not a cusp with g_xx > 0")

    if case in ("codim1", "cusp"):
        ok = g_r < 0
        rep.h2 = Check(ok, {"g(a,0)": g_r})
        if not ok:
            rep.violations.append("H2: g(a,0) is not negative")
    else:
        ok = abs(g_r) < tol.tangency_tol and f_r * gx_r > 0 and f_l * f_r > 0
        rep.h2_prime = Check(ok, {"g(a,0)": g_r, "f*g_x(a,0)": f_r * gx_r, "f(-a,0)*f(a,0)": f_l * f_r})
        if not ok:
            rep.violations.append("H2': (a,0) is not a fold with f*g_x > 0 and f(-a)f(a) > 0")

    if not rep.h0.holds:
        return rep

    from .coeffs import coefficient_report

    try:
        report = coefficient_report(model, case)
    except Exception as exc:  # surfaced as a violation, not a crash
        rep.violations.append(f"coefficients unavailable: {exc}")
        return rep

    if case == "foldfold":
        delta = report.Delta
        rep.h3 = Check(delta > 0, {"Delta": delta, "lambda0": report.lambda0})
        if not delta > 0:
            rep.violations.append("H3: Delta is not positive")
        mat = np.array([report.mu, report.kappa])
        rep.nondegeneracy = _independence(mat, ("mu", "kappa"), tol)
    elif case == "cusp":
        mat = np.array([report.zeta, report.eta])
        rep.nondegeneracy = _independence(mat, ("zeta", "eta"), tol)
    else:
        th = np.asarray(report.theta)
        norm = float(np.linalg.norm(th))
        rep.nondegeneracy = Check(norm > tol.degeneracy_tol, {"theta": th.tolist(), "norm": norm})
    if not rep.nondegeneracy.holds:
        rep.violations.append("nondegeneracy: coefficient vectors are degenerate")
    return rep


def _independence(mat: np.ndarray, names: tuple[str, str], tol: HypothesisTolerances) -> Check:
    if mat.shape[1] == 2:
        det = float(np.linalg.det(mat))
        measure = abs(det)
        wit = {names[0]: mat[0].tolist(), names[1]: mat[1].tolist(), "determinant": det}
    else:
        s = np.linalg.svd(mat, compute_uv=False)
        measure = float(s[-1])
        wit = {names[0]: mat[0].tolist(), names[1]: mat[1].tolist(), "min_singular_value": measure}
    return Check(measure > tol.degeneracy_tol, wit)
