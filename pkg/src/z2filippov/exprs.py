"""Scalar expressions in x, y and parameters a1..am.

Expressions are immutable trees.  They can be parsed from text, printed back
in a canonical form, evaluated in double precision, differentiated exactly and
compiled into plain Python closures for use inside ODE right-hand sides.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt")


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    pass


class ArityError(ExprError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    pass


# ---------------------------------------------------------------- nodes


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    # 0 -> x, 1 -> y, k >= 2 -> a(k-1)
    index: int


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


Expr = Const | Var | Neg | Func | BinOp | Pow

X = Var(0)
Y = Var(1)


def var_name(index: int) -> str:
    if index == 0:
        return "x"
    if index == 1:
        return "y"
    return f"a{index - 1}"


def var_index(name: str) -> int:
    """Map 'x', 'y', 'a3' to variable indices 0, 1, 4."""
    if name == "x":
        return 0
    if name == "y":
        return 1
    if re.fullmatch(r"a[1-9][0-9]*", name):
        return int(name[1:]) + 1
    raise UnknownIdentifierError(f"unknown variable {name!r}")


def param(i: int) -> Var:
    """Variable node for the parameter a<i> (1-based)."""
    return Var(i + 1)


# ------------------------------------------------- folding constructors


def _apply_func(name: str, v: float) -> float:
    try:
        if name == "exp":
            return math.exp(v)
        if name == "ln":
            return math.log(v)
        if name == "sin":
            return math.sin(v)
        if name == "cos":
            return math.cos(v)
        return math.sqrt(v)
    except (ValueError, OverflowError) as exc:
        raise ExprDomainError(f"{name}({v!r}): {exc}") from None


def _apply_binop(op: str, u: float, v: float) -> float:
    if op == "+":
        return u + v
    if op == "-":
        return u - v
    if op == "*":
        return u * v
    if v == 0.0:
        raise ExprDomainError("division by zero")
    return u / v


def _apply_pow(u: float, n: int) -> float:
    if n < 0 and u == 0.0:
        raise ExprDomainError("zero to a negative power")
    try:
        return u**n
    except OverflowError as exc:
        raise ExprDomainError(str(exc)) from None


def neg(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    return Neg(e)


def func(name: str, e: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise UnknownIdentifierError(f"unknown function {name!r}")
    if isinstance(e, Const):
        return Const(_apply_func(name, e.value))
    return Func(name, e)


def binop(op: str, left: Expr, right: Expr) -> Expr:
    if isinstance(left, Const) and isinstance(right, Const):
        return Const(_apply_binop(op, left.value, right.value))
    return BinOp(op, left, right)


def power(base: Expr, n: int) -> Expr:
    if isinstance(base, Const):
        return Const(_apply_pow(base.value, n))
    return Pow(base, n)


# Zero/one pruning is only used while differentiating, where it keeps the
# derivative trees of products from growing with dead branches.


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def _add(u: Expr, v: Expr) -> Expr:
    if _is(u, 0.0):
        return v
    if _is(v, 0.0):
        return u
    return binop("+", u, v)


def _sub(u: Expr, v: Expr) -> Expr:
    if _is(v, 0.0):
        return u
    if _is(u, 0.0):
        return neg(v)
    return binop("-", u, v)


def _mul(u: Expr, v: Expr) -> Expr:
    if _is(u, 0.0) or _is(v, 0.0):
        return Const(0.0)
    if _is(u, 1.0):
        return v
    if _is(v, 1.0):
        return u
    return binop("*", u, v)


def _div(u: Expr, v: Expr) -> Expr:
    if _is(u, 0.0):
        return Const(0.0)
    if _is(v, 1.0):
        return u
    return binop("/", u, v)


# ----------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, m: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.m = m

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text, pos = self.take()
        if text != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = binop(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = binop(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        negate = False
        if self.peek()[:2] == ("op", "-"):
            self.take()
            negate = True
        e = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.take()
                sign = -1
            kind, text, pos = self.take()
            if kind != "num" or not text.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", pos)
            e = power(e, sign * int(text))
        return neg(e) if negate else e

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return func(text, arg)
            try:
                idx = var_index(text)
            except UnknownIdentifierError:
                raise UnknownIdentifierError(
                    f"unknown identifier {text!r} at offset {pos}"
                ) from None
            if idx >= self.m + 2:
                raise ArityError(
                    f"parameter {text!r} at offset {pos} exceeds arity m={self.m}"
                )
            return Var(idx)
        raise ExprSyntaxError(f"unexpected token {text!r}", pos)


def parse_expr(text: str, m: int) -> Expr:
    """Parse ``text`` into an expression over x, y, a1..am."""
    if m < 0:
        raise ArityError("parameter arity must be non-negative")
    return _Parser(text, m).parse()


# ------------------------------------------------------------ inspection


def max_var_index(e: Expr) -> int:
    """Largest variable index used in ``e`` (-1 for constants)."""
    if isinstance(e, Const):
        return -1
    if isinstance(e, Var):
        return e.index
    if isinstance(e, (Neg, Func)):
        return max_var_index(e.arg)
    if isinstance(e, Pow):
        return max_var_index(e.base)
    return max(max_var_index(e.left), max_var_index(e.right))


def check_arity(e: Expr, m: int) -> None:
    if max_var_index(e) >= m + 2:
        raise ArityError(
            f"expression uses {var_name(max_var_index(e))} but arity is m={m}"
        )


# ----------------------------------------------------------------- printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_const(v: float) -> str:
    s = repr(float(v))
    if s in ("inf", "-inf", "nan"):
        raise ExprError(f"cannot print non-finite constant {s}")
    return s


def to_string(e: Expr) -> str:
    """Canonical text form; ``parse_expr(to_string(e), m) == e``."""
    return _show(e, 0)


def _atom(e: Expr) -> str:
    # text that parses as a single atom
    if isinstance(e, Const):
        s = _fmt_const(e.value)
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return var_name(e.index)
    if isinstance(e, Func):
        return f"{e.name}({_show(e.arg, 0)})"
    return f"({_show(e, 0)})"


def _show(e: Expr, level: int) -> str:
    # level 0: any expr; 1: right operand of +/-; 2: operand of * or /;
    # 3: right operand of * or / (anything that is a single factor)
    if isinstance(e, (Const, Var, Func)):
        return _atom(e)
    if isinstance(e, Pow):
        return f"{_atom(e.base)}^{e.exponent}"
    if isinstance(e, Neg):
        inner = e.arg
        if isinstance(inner, Pow):
            body = f"{_atom(inner.base)}^{inner.exponent}"
        else:
            body = _atom(inner)
        s = "-" + body
        # a leading minus is a factor; keep it unambiguous after an operator
        return f"({s})" if level in (1, 3) else s
    prec = _PREC[e.op]
    if prec == 1:
        s = f"{_show(e.left, 0)} {e.op} {_show(e.right, 1)}"
        return f"({s})" if level >= 1 else s
    s = f"{_show(e.left, 2)}{e.op}{_show(e.right, 3)}"
    return f"({s})" if level >= 3 else s


# ---------------------------------------------------------- differentiation


def diff_expr(e: Expr, var: int | str) -> Expr:
    """Exact partial derivative of ``e`` with respect to ``var``."""
    v = var_index(var) if isinstance(var, str) else int(var)
    return _diff(e, v)


def _diff(e: Expr, v: int) -> Expr:
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.index == v else 0.0)
    if isinstance(e, Neg):
        d = _diff(e.arg, v)
        return Const(0.0) if _is(d, 0.0) else neg(d)
    if isinstance(e, Func):
        u = e.arg
        du = _diff(u, v)
        if _is(du, 0.0):
            return Const(0.0)
        if e.name == "exp":
            outer = e
        elif e.name == "ln":
            return _div(du, u)
        elif e.name == "sin":
            outer = func("cos", u)
        elif e.name == "cos":
            outer = neg(func("sin", u))
        else:
            return _div(du, _mul(Const(2.0), e))
        return _mul(outer, du)
    if isinstance(e, Pow):
        du = _diff(e.base, v)
        n = e.exponent
        if n == 0 or _is(du, 0.0):
            return Const(0.0)
        lower = e.base if n == 2 else (Const(1.0) if n == 1 else power(e.base, n - 1))
        return _mul(_mul(Const(float(n)), lower), du)
    dl = _diff(e.left, v)
    dr = _diff(e.right, v)
    if e.op == "+":
        return _add(dl, dr)
    if e.op == "-":
        return _sub(dl, dr)
    if e.op == "*":
        return _add(_mul(dl, e.right), _mul(e.left, dr))
    # quotient rule
    num = _sub(_mul(dl, e.right), _mul(e.left, dr))
    return _div(num, power(e.right, 2))


# -------------------------------------------------------------- evaluation


def eval_expr(e: Expr, x: float, y: float, alpha: Sequence[float] = ()) -> float:
    """Evaluate ``e`` at (x, y; alpha) in IEEE double precision."""
    env = (float(x), float(y), *map(float, alpha))
    return _eval(e, env)


def _eval(e: Expr, env: tuple[float, ...]) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.index]
        except IndexError:
            raise ArityError(f"no value supplied for {var_name(e.index)}") from None
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Func):
        return _apply_func(e.name, _eval(e.arg, env))
    if isinstance(e, Pow):
        return _apply_pow(_eval(e.base, env), e.exponent)
    return _apply_binop(e.op, _eval(e.left, env), _eval(e.right, env))


# ------------------------------------------------------------- compilation


def _py(e: Expr) -> str:
    if isinstance(e, Const):
        return f"({_fmt_const(e.value)})"
    if isinstance(e, Var):
        return ("x", "y")[e.index] if e.index < 2 else f"p{e.index - 2}"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg)})"
    if isinstance(e, Func):
        name = {"ln": "_log"}.get(e.name, "_" + e.name)
        return f"{name}({_py(e.arg)})"
    if isinstance(e, Pow):
        return f"_pow({_py(e.base)}, {e.exponent})"
    return f"({_py(e.left)} {e.op} {_py(e.right)})"


def _checked(name: str) -> Callable[[float], float]:
    def g(v: float) -> float:
        return _apply_func(name, v)

    return g


_COMPILE_ENV = {
    "_exp": _checked("exp"),
    "_log": _checked("ln"),
    "_sin": math.sin,
    "_cos": math.cos,
    "_sqrt": _checked("sqrt"),
    "_pow": _apply_pow,
}


def compile_exprs(exprs: Sequence[Expr], m: int) -> Callable[..., tuple[float, ...]]:
    """Compile expressions into one closure ``f(x, y, alpha) -> tuple``.

    The closure performs the same floating point operations in the same order
    as :func:`eval_expr`, so results are bit-identical.  Division by zero is
    reported as :class:`ExprDomainError`.
    """
    for e in exprs:
        check_arity(e, m)
    params = ", ".join(f"p{i}" for i in range(m))
    unpack = f"    {params}{',' if m == 1 else ''} = alpha\n" if m else ""
    body = ", ".join(_py(e) for e in exprs)
    src = (
        "def _f(x, y, alpha):\n"
        f"{unpack}"
        "    try:\n"
        f"        return ({body}{',' if len(exprs) == 1 else ''})\n"
        "    except ZeroDivisionError:\n"
        "        raise _DomainError('division by zero') from None\n"
    )
    env = dict(_COMPILE_ENV)
    env["_DomainError"] = ExprDomainError
    exec(compile(src, "<expr>", "exec"), env)
    return env["_f"]
