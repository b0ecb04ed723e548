"""User-defined wall and exit-pressure profiles.

Profiles enter as strings in a tiny arithmetic grammar (one free
variable, +, -, *, /, integer powers, sin/cos/exp, unary minus) and are
differentiated symbolically so boundary data built from f', f'' carry no
finite-difference noise.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionError

__all__ = [
    "Expr", "Const", "Var", "parse_expression", "differentiate", "eval_deriv",
    "WallProfile", "ExitPressureProfile", "validate_wall", "integrate",
]


# ---------------------------------------------------------------------------
# expression tree

class Expr:
    """Base node of the expression tree; subclasses are immutable."""

    def eval(self, x):
        raise NotImplementedError

    def deriv(self) -> "Expr":
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def eval(self, x):
        return self.value if np.isscalar(x) else np.full_like(np.asarray(x, dtype=float), self.value)

    def deriv(self):
        return Const(0.0)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def eval(self, x):
        return x

    def deriv(self):
        return Const(1.0)

    def __str__(self):
        return self.name


def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and a.value == 0.0:
        return b
    if isinstance(b, Const) and b.value == 0.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const) and b.value == 0.0:
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const):
        if a.value == 0.0:
            return Const(0.0)
        if a.value == 1.0:
            return b
    if isinstance(b, Const):
        if b.value == 0.0:
            return Const(0.0)
        if b.value == 1.0:
            return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr

    def eval(self, x):
        return self.a.eval(x) + self.b.eval(x)

    def deriv(self):
        return _add(self.a.deriv(), self.b.deriv())

    def __str__(self):
        return f"({self.a} + {self.b})"


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr

    def eval(self, x):
        return self.a.eval(x) - self.b.eval(x)

    def deriv(self):
        return _sub(self.a.deriv(), self.b.deriv())

    def __str__(self):
        return f"({self.a} - {self.b})"


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr

    def eval(self, x):
        return self.a.eval(x) * self.b.eval(x)

    def deriv(self):
        return _add(_mul(self.a.deriv(), self.b), _mul(self.a, self.b.deriv()))

    def __str__(self):
        return f"({self.a} * {self.b})"


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr

    def eval(self, x):
        den = self.b.eval(x)
        if np.isscalar(den):
            if den == 0.0:
                raise ExpressionError(f"division by zero at x={x!r} in {self}")
            return self.a.eval(x) / den
        if np.any(den == 0.0):
            bad = np.asarray(x)[np.nonzero(den == 0.0)][0]
            raise ExpressionError(f"division by zero at x={bad!r} in {self}")
        return self.a.eval(x) / den

    def deriv(self):
        num = _sub(_mul(self.a.deriv(), self.b), _mul(self.a, self.b.deriv()))
        return Div(num, _mul(self.b, self.b))

    def __str__(self):
        return f"({self.a} / {self.b})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def eval(self, x):
        v = self.base.eval(x)
        if self.exponent < 0:
            if np.isscalar(v):
                if v == 0.0:
                    raise ExpressionError(f"zero raised to negative power at x={x!r}")
            elif np.any(v == 0.0):
                raise ExpressionError("zero raised to negative power")
        return v ** self.exponent

    def deriv(self):
        n = self.exponent
        if n == 0:
            return Const(0.0)
        return _mul(_mul(Const(float(n)), Pow(self.base, n - 1) if n != 1 else Const(1.0)),
                    self.base.deriv())

    def __str__(self):
        return f"({self.base}^{self.exponent})"


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr

    def eval(self, x):
        return -self.a.eval(x)

    def deriv(self):
        return Neg(self.a.deriv())

    def __str__(self):
        return f"(-{self.a})"


@dataclass(frozen=True)
class Fun(Expr):
    name: str  # sin | cos | exp
    a: Expr

    def eval(self, x):
        v = self.a.eval(x)
        return getattr(np, self.name)(v)

    def deriv(self):
        inner = self.a.deriv()
        if self.name == "sin":
            outer = Fun("cos", self.a)
        elif self.name == "cos":
            outer = Neg(Fun("sin", self.a))
        else:  # exp
            outer = Fun("exp", self.a)
        return _mul(outer, inner)

    def __str__(self):
        return f"{self.name}({self.a})"


_FUNCTIONS = ("sin", "cos", "exp")


# ---------------------------------------------------------------------------
# parser: precedence power > unary minus > * , / > + , -

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([A-Za-z_]\w*)|(\^|\*|/|\+|-|\(|\)))")


def _tokenize(src: str):
    tokens, pos = [], 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            # skip pure whitespace tail
            if src[pos:].strip() == "":
                break
            raise ExpressionError(f"syntax error at position {pos}: unexpected {src[pos]!r}")
        num, ident, op = m.groups()
        if num is not None:
            tokens.append(("num", num, m.start(1)))
        elif ident is not None:
            tokens.append(("ident", ident, m.start(2)))
        else:
            tokens.append(("op", op, m.start(3)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, var: str | None):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.var = var

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExpressionError(f"syntax error at position {pos}: expected {op!r}, got {val!r}")

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"syntax error at position {pos}: trailing {val!r}")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def term(self) -> Expr:
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.unary()
                node = Mul(node, rhs) if val == "*" else Div(node, rhs)
            else:
                return node

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        sign = 1
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.next()
            sign = -1
        kind, val, pos = self.next()
        if kind != "num":
            raise ExpressionError(f"syntax error at position {pos}: exponent must be an integer")
        if "." in val:
            raise ExpressionError(f"non-integer exponent {val!r} at position {pos}")
        return sign * int(val)

    def atom(self) -> Expr:
        kind, val, pos = self.next()
        if kind == "num":
            return Const(float(val))
        if kind == "ident":
            if val in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Fun(val, arg)
            if self.var is None:
                self.var = val
            if val != self.var:
                raise ExpressionError(f"unknown identifier {val!r} at position {pos} "
                                      f"(free variable is {self.var!r})")
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"syntax error at position {pos}: unexpected {val!r}")


def parse_expression(src: str, var: str | None = None) -> Expr:
    """Parse ``src`` into an expression tree with a single free variable.

    The variable name is taken from ``var`` or inferred from the first
    identifier; any second identifier is rejected.
    """
    if not src or not src.strip():
        raise ExpressionError("empty expression")
    return _Parser(src, var).parse()


def differentiate(ast: Expr, order: int = 1) -> Expr:
    node = ast
    for _ in range(order):
        node = node.deriv()
    return node


def eval_deriv(ast: Expr, point, order: int = 0):
    """Evaluate the order-th symbolic derivative of ``ast`` at ``point``.

    ``point`` may be a scalar or an ndarray; order must be <= 4.
    """
    if not 0 <= order <= 4:
        raise ValueError(f"derivative order must be 0..4, got {order}")
    val = differentiate(ast, order).eval(point)
    if np.isscalar(val) or np.ndim(val) == 0:
        val = float(val)
        if not np.isfinite(val):
            raise ExpressionError(f"non-finite value at x={point!r}")
        return val
    val = np.asarray(val, dtype=float)
    if not np.all(np.isfinite(val)):
        bad = np.asarray(point)[~np.isfinite(val)][0]
        raise ExpressionError(f"non-finite value at x={bad!r}")
    return val


# ---------------------------------------------------------------------------
# profiles

COMPAT_TOL = 1e-10  # |f^(j)(L0)| must vanish to this for j = 0..3


@dataclass(frozen=True)
class WallProfile:
    """Upper-wall shape on [L0, L1]: height 1 + sigma * f(x1).

    The lower wall is flat.  Derivative trees up to f''' are cached so
    repeated boundary-data evaluations stay cheap and noise-free.
    """

    L0: float
    L1: float
    sigma: float
    f: Expr
    f1: Expr = None
    f2: Expr = None
    f3: Expr = None

    def __post_init__(self):
        if not self.L1 > self.L0:
            raise ValueError(f"need L0 < L1, got [{self.L0}, {self.L1}]")
        object.__setattr__(self, "f1", self.f.deriv())
        object.__setattr__(self, "f2", self.f1.deriv())
        object.__setattr__(self, "f3", self.f2.deriv())

    def deriv(self, x, order: int = 0):
        ast = (self.f, self.f1, self.f2, self.f3)[order] if order <= 3 else differentiate(self.f, order)
        return eval_deriv(ast, x, 0)


@dataclass(frozen=True)
class ExitPressureProfile:
    """Exit total-pressure perturbation per unit sigma, on [0, 1]."""

    P_ex: Expr

    def __call__(self, x2):
        return eval_deriv(self.P_ex, x2, 0)

    def mean(self, n: int = 256) -> float:
        return integrate(lambda t: eval_deriv(self.P_ex, t, 0), 0.0, 1.0, n)

    def c2_norm_finite(self, n: int = 128) -> bool:
        xs = np.linspace(0.0, 1.0, n + 1)
        for order in range(3):
            vals = eval_deriv(self.P_ex, xs, order)
            if not np.all(np.isfinite(vals)):
                return False
        return True


def validate_wall(profile: WallProfile) -> list:
    """Orders j in 0..3 whose derivative at L0 is not zero (tol 1e-10)."""
    return [j for j in range(4)
            if abs(eval_deriv(profile.f, profile.L0, j)) > COMPAT_TOL]


def integrate(fn, a: float, b: float, n: int) -> float:
    """Composite Simpson rule with n (even) cells; exact on cubics."""
    if n < 2 or n % 2 != 0:
        raise ValueError(f"Simpson rule needs an even cell count >= 2, got {n}")
    xs = np.linspace(a, b, n + 1)
    try:
        ys = np.asarray(fn(xs), dtype=float)
        if ys.shape != xs.shape:
            raise TypeError
    except (TypeError, ValueError):
        ys = np.array([fn(x) for x in xs], dtype=float)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((b - a) / (3.0 * n) * np.dot(w, ys))
