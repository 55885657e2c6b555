"""A small arithmetic language for metric components, evaluated as jets.

Grammar (EBNF, whitespace-insensitive)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = primary [ "^" unary ] ;              (* right associative *)
    primary = number | name | name "(" expr ")" | "(" expr ")" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
    name    = letter { letter | digit | "_" } ;

Names resolve, in order, to coordinates ``x1 .. xn``, the constant ``pi``,
declared parameters, the functions ``sin cos exp log sqrt`` and declared
profiles.  Profiles are univariate functions known only numerically; at
evaluation time the caller binds them to a callable ``(u0, order) ->
[phi(u0), phi'(u0), ..., phi^(order)(u0)]``.

``-x1^2`` parses as ``-(x1^2)``.  Integer exponents are evaluated by repeated
multiplication; any other exponent needs a positive base.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .jets import JetSpace, jet_space

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(ValueError):
    """Base class for DSL failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class ArityError(ExprError):
    def __init__(self, name: str, got: int, offset: int):
        super().__init__(f"{name} takes exactly 1 argument, got {got} (offset {offset})")
        self.offset = offset


class DomainError(ExprError):
    """Evaluation left the domain of a node (division by zero, log of x <= 0, ...)."""

    def __init__(self, node: "Expr", point, reason: str):
        super().__init__(f"{reason} in {node} at point {tuple(point)}")
        self.node = node
        self.point = tuple(point)


# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based coordinate index

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class Param:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg:
    arg: "Expr"

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"

    def __str__(self):
        return f"{self.func}({self.arg})"


@dataclass(frozen=True)
class ProfileRef:
    name: str
    arg: "Expr"

    def __str__(self):
        return f"{self.name}({self.arg})"


Expr = Union[Const, Var, Param, Neg, BinOp, Call, ProfileRef]


def variables(e: Expr) -> set[int]:
    """Coordinate indices used by ``e``."""
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, (Neg, Call, ProfileRef)):
        return variables(e.arg)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    return set()


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, dim, params, profiles):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.dim = dim
        self.params = set(params)
        self.profiles = set(profiles)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, off = self.take()
        if val != text:
            raise ExprSyntaxError(f"expected {text!r}, found {val or 'end of input'!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return e

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(val, off)
            m = re.fullmatch(r"x([1-9][0-9]*)", val)
            if m:
                idx = int(m.group(1))
                if self.dim is not None and idx > self.dim:
                    raise UnknownIdentifier(val, off)
                return Var(idx)
            if val == "pi":
                return Const(math.pi)
            if val in self.params:
                return Param(val)
            raise UnknownIdentifier(val, off)
        raise ExprSyntaxError(f"unexpected token {val or 'end of input'!r}", off)

    def call(self, name, off):
        if name not in FUNCTIONS and name not in self.profiles:
            raise UnknownIdentifier(name, off)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != 1:
            raise ArityError(name, len(args), off)
        if name in FUNCTIONS:
            return Call(name, args[0])
        return ProfileRef(name, args[0])


def parse_expr(src: str, dim: int | None = None, params=(), profiles=()) -> Expr:
    """Parse ``src`` into an expression tree.

    ``dim`` bounds the coordinate indices, ``params`` and ``profiles`` declare
    the free names the expression may use.
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(src, dim, params, profiles).parse()


# ---------------------------------------------------------------- evaluation

Profile = Callable[[float, int], "np.ndarray"]
Binding = Union[float, Profile]


def _eval(e: Expr, sp: JetSpace, point, bindings: Mapping[str, Binding]) -> np.ndarray:
    if isinstance(e, Const):
        return sp.constant(e.value)
    if isinstance(e, Var):
        if e.index > sp.n:
            raise DomainError(e, point, f"coordinate x{e.index} beyond dimension {sp.n}")
        return sp.variable(e.index - 1, point[e.index - 1])
    if isinstance(e, Param):
        try:
            return sp.constant(float(bindings[e.name]))
        except KeyError:
            raise DomainError(e, point, f"parameter {e.name!r} is unbound") from None
    if isinstance(e, Neg):
        return -_eval(e.arg, sp, point, bindings)
    if isinstance(e, Call):
        a = _eval(e.arg, sp, point, bindings)
        try:
            return getattr(sp, e.func)(a)
        except (ValueError, ZeroDivisionError) as exc:
            raise DomainError(e, point, str(exc)) from None
    if isinstance(e, ProfileRef):
        a = _eval(e.arg, sp, point, bindings)
        prof = bindings.get(e.name)
        if prof is None or not callable(prof):
            raise DomainError(e, point, f"profile {e.name!r} is unbound")
        derivs = np.asarray(prof(float(a[0]), sp.order), dtype=float)
        if derivs.shape != (sp.order + 1,):
            raise DomainError(e, point, f"profile {e.name!r} returned {derivs.shape}")
        return sp.compose(a, derivs)
    if isinstance(e, BinOp):
        left = _eval(e.left, sp, point, bindings)
        if e.op == "^":
            return _power(e, left, sp, point, bindings)
        right = _eval(e.right, sp, point, bindings)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return sp.mul(left, right)
        if e.op == "/":
            if right[0] == 0.0:
                raise DomainError(e, point, "division by zero")
            return sp.div(left, right)
    raise TypeError(f"not an expression node: {e!r}")


def _power(e: BinOp, base, sp, point, bindings):
    exponent = _eval(e.right, sp, point, bindings)
    if np.any(exponent[1:] != 0.0):
        # variable exponent: a^b = exp(b log a)
        if base[0] <= 0.0:
            raise DomainError(e, point, "variable exponent needs a positive base")
        return sp.exp(sp.mul(exponent, sp.log(base)))
    p = float(exponent[0])
    if p == int(p) and abs(p) <= 64:
        if p < 0 and base[0] == 0.0:
            raise DomainError(e, point, "negative power of zero")
        return sp.powi(base, int(p))
    if base[0] <= 0.0:
        raise DomainError(e, point, "real exponent needs a positive base")
    return sp.powr(base, p)


class Jet:
    """Value and all partial derivatives up to ``order`` of a scalar at ``point``."""

    def __init__(self, space: JetSpace, point, taylor):
        self.space = space
        self.point = tuple(float(x) for x in point)
        self.taylor = np.asarray(taylor, dtype=float)
        self.taylor.setflags(write=False)

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self) -> float:
        return float(self.taylor[0])

    @property
    def coeffs(self) -> dict[tuple[int, ...], float]:
        """Mixed partial derivatives keyed by multi-index."""
        d = self.space.to_derivatives(self.taylor)
        return {a: float(v) for a, v in zip(self.space.alphas, d)}

    def partial(self, *alpha: int) -> float:
        """``partial(2, 0, 1)`` is d^3 f / dx1^2 dx3."""
        alpha = tuple(alpha) + (0,) * (self.space.n - len(alpha))
        i = self.space.index[alpha]
        return float(self.taylor[i] * self.space.factorial[i])

    def gradient(self) -> np.ndarray:
        return np.array([self.partial(*np.eye(self.space.n, dtype=int)[v]) for v in range(self.space.n)])

    def truncate(self, order: int) -> "Jet":
        sp = jet_space(self.space.n, order)
        return Jet(sp, self.point, self.taylor[: sp.size])

    def _other(self, other):
        if isinstance(other, Jet):
            if other.space is not self.space or other.point != self.point:
                raise ValueError("jets live in different spaces or at different points")
            return other.taylor
        return self.space.constant(float(other))

    def __add__(self, other):
        return Jet(self.space, self.point, self.taylor + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Jet(self.space, self.point, self.taylor - self._other(other))

    def __mul__(self, other):
        return Jet(self.space, self.point, self.space.mul(self.taylor, self._other(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Jet(self.space, self.point, self.space.div(self.taylor, self._other(other)))

    def __neg__(self):
        return Jet(self.space, self.point, -self.taylor)

    def __repr__(self):
        return f"Jet(point={self.point}, order={self.order}, value={self.value:.6g})"


def eval_jet(e: Expr | str, point, order: int, bindings: Mapping[str, Binding] | None = None) -> Jet:
    """Exact truncated Taylor expansion of ``e`` at ``point`` up to ``order``."""
    if isinstance(e, str):
        b = bindings or {}
        e = parse_expr(e, len(point), [k for k, v in b.items() if not callable(v)],
                       [k for k, v in b.items() if callable(v)])
    sp = jet_space(len(point), order)
    return Jet(sp, point, _eval(e, sp, tuple(point), bindings or {}))


def eval_array(e: Expr, space: JetSpace, point, bindings=None) -> np.ndarray:
    """Raw coefficient array of ``e`` in ``space`` (used by the curvature pipeline)."""
    return _eval(e, space, tuple(point), bindings or {})
