"""Polynomial expression trees for chart coordinates.

Expressions are built over a small alphabet of variables (``z``, ``zb``, ``s``
for explicit charts, ``x``, ``y``, ``s`` for implicit plane curves), the
imaginary unit, rational constants, the four field operations (division only
by monomials), integer powers and ``re``/``im``.

Two representations live here:

* :class:`Expr` trees, which are what the parser produces and what symbolic
  differentiation acts on;
* :class:`Poly`, the expanded Laurent-polynomial form used for fast vectorised
  evaluation, canonical comparison and leading-term analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

__all__ = [
    "Expr", "Num", "ImagUnit", "Var", "Add", "Sub", "Mul", "Div", "Pow", "Neg",
    "Re", "Im", "ExprSyntaxError", "ExprSemanticError", "parse_expr", "diff",
    "Poly", "expand", "to_text", "EXPLICIT_VARS", "IMPLICIT_VARS",
]

EXPLICIT_VARS = ("z", "zb", "s")
IMPLICIT_VARS = ("x", "y", "s")


class ExprSyntaxError(ValueError):
    """Malformed expression text. ``pos`` is a 0-based offset into the text."""

    def __init__(self, message: str, pos: int, expected: str | None = None):
        self.pos = pos
        self.expected = expected
        super().__init__(message)


class ExprSemanticError(ValueError):
    pass


# ---------------------------------------------------------------------------
# tree


class Expr:
    def __add__(self, other):
        return Add(self, _lift(other))

    def __radd__(self, other):
        return Add(_lift(other), self)

    def __sub__(self, other):
        return Sub(self, _lift(other))

    def __rsub__(self, other):
        return Sub(_lift(other), self)

    def __mul__(self, other):
        return Mul(self, _lift(other))

    def __rmul__(self, other):
        return Mul(_lift(other), self)

    def __truediv__(self, other):
        return Div(self, _lift(other))

    def __pow__(self, n: int):
        return Pow(self, int(n))

    def __neg__(self):
        return Neg(self)

    def variables(self) -> set[str]:
        out: set[str] = set()
        _collect_vars(self, out)
        return out


def _lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, complex):
        if v.imag == 0:
            return Num(Fraction(v.real))
        return Add(Num(Fraction(v.real)), Mul(Num(Fraction(v.imag)), ImagUnit()))
    return Num(Fraction(v))


@dataclass(frozen=True)
class Num(Expr):
    value: Fraction


@dataclass(frozen=True)
class ImagUnit(Expr):
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Re(Expr):
    arg: Expr


@dataclass(frozen=True)
class Im(Expr):
    arg: Expr


def _collect_vars(e: Expr, out: set[str]) -> None:
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, (Add, Sub, Mul, Div)):
        _collect_vars(e.left, out)
        _collect_vars(e.right, out)
    elif isinstance(e, Pow):
        _collect_vars(e.base, out)
    elif isinstance(e, (Neg, Re, Im)):
        _collect_vars(e.arg, out)


# ---------------------------------------------------------------------------
# parser


_KEYWORDS = ("re(", "im(")


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.pos = 0
        self.variables = variables

    def error(self, expected: str, pos: int | None = None):
        pos = self.pos if pos is None else pos
        found = self.text[pos] if pos < len(self.text) else "end of input"
        raise ExprSyntaxError(f"expected {expected!r}, found {found!r} at offset {pos}", pos, expected)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek():
            if self.peek() == ")":
                self.error("end of expression")
            self.error("operator or end of expression")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            rhs = self.factor()
            if op == "*":
                e = Mul(e, rhs)
            elif isinstance(e, Num) and isinstance(rhs, Num):
                if rhs.value == 0:
                    raise ExprSemanticError("division by zero")
                e = Num(e.value / rhs.value)
            else:
                e = Div(e, rhs)
        return e

    def factor(self) -> Expr:
        if self.peek() == "-":
            self.pos += 1
            return Neg(self.factor())
        b = self.base()
        if self.peek() == "^":
            self.pos += 1
            if self.peek() == "-":
                raise ExprSemanticError(f"negative exponent at offset {self.pos}")
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if start == self.pos:
                self.error("unsigned integer exponent")
            b = Pow(b, int(self.text[start:self.pos]))
        return b

    def base(self) -> Expr:
        c = self.peek()
        t = self.text
        if c == "(":
            self.pos += 1
            e = self.expr()
            if self.peek() != ")":
                self.error(")")
            self.pos += 1
            return e
        for kw, node in (("re(", Re), ("im(", Im)):
            if t.startswith(kw, self.pos):
                self.pos += len(kw)
                e = self.expr()
                if self.peek() != ")":
                    self.error(")")
                self.pos += 1
                return node(e)
        if c.isdigit() or c == ".":
            return self.number()
        if c.isalpha() or c == "_":
            start = self.pos
            while self.pos < len(t) and (t[self.pos].isalnum() or t[self.pos] == "_"):
                self.pos += 1
            name = t[start:self.pos]
            if name == "i":
                return ImagUnit()
            if name not in self.variables:
                raise ExprSemanticError(
                    f"unknown variable {name!r} at offset {start}; allowed: {', '.join(self.variables)}"
                )
            return Var(name)
        self.error("number, variable, 're(', 'im(' or '('")

    def number(self) -> Num:
        t = self.text
        start = self.pos
        while self.pos < len(t) and (t[self.pos].isdigit() or t[self.pos] == "."):
            self.pos += 1
        if self.pos < len(t) and t[self.pos] in "eE":
            j = self.pos + 1
            if j < len(t) and t[j] in "+-":
                j += 1
            if j < len(t) and t[j].isdigit():
                self.pos = j
                while self.pos < len(t) and t[self.pos].isdigit():
                    self.pos += 1
        literal = t[start:self.pos]
        try:
            return Num(Fraction(literal))
        except ValueError:
            raise ExprSyntaxError(f"bad number {literal!r} at offset {start}", start, "number") from None


def parse_expr(text: str, variables: tuple[str, ...] = EXPLICIT_VARS) -> Expr:
    """Parse one expression; raises ExprSyntaxError / ExprSemanticError."""
    e = _Parser(text, variables).parse()
    expand(e, variables)  # rejects non-monomial denominators early
    return e


# ---------------------------------------------------------------------------
# printing


def _num_text(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        return repr(float(v)) if Fraction(repr(float(v))) == v else f"{v.numerator}/{v.denominator}"
    return f"{v.numerator}/{v.denominator}"


def to_text(e: Expr) -> str:
    """Fully parenthesised text; ``parse_expr(to_text(e)) == e``."""
    if isinstance(e, Num):
        s = _num_text(e.value)
        return f"({s})" if "/" in s else s
    if isinstance(e, ImagUnit):
        return "i"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, Re):
        return f"re({to_text(e.arg)})"
    if isinstance(e, Im):
        return f"im({to_text(e.arg)})"
    if isinstance(e, Pow):
        return f"{to_text(e.base)}^{e.exponent}"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    return f"({to_text(e.left)} {op} {to_text(e.right)})"


# ---------------------------------------------------------------------------
# differentiation

_ZERO = Num(Fraction(0))
_ONE = Num(Fraction(1))


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Num) and e.value == 1


def _add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return Neg(b)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return _ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return Mul(a, b)


def diff(e: Expr, dvars: Mapping[str, Expr]) -> Expr:
    """Derivative along a derivation given by its action on the variables.

    ``dvars`` maps variable name to the derivative of that variable, e.g. the
    real partial d/dx on the z-plane is ``{"z": 1, "zb": 1}`` and d/dy is
    ``{"z": i, "zb": -i}``. Such real derivations commute with re/im.
    """
    if isinstance(e, (Num, ImagUnit)):
        return _ZERO
    if isinstance(e, Var):
        return dvars.get(e.name, _ZERO)
    if isinstance(e, Add):
        return _add(diff(e.left, dvars), diff(e.right, dvars))
    if isinstance(e, Sub):
        return _sub(diff(e.left, dvars), diff(e.right, dvars))
    if isinstance(e, Neg):
        d = diff(e.arg, dvars)
        return _ZERO if _is_zero(d) else Neg(d)
    if isinstance(e, Mul):
        return _add(_mul(diff(e.left, dvars), e.right), _mul(e.left, diff(e.right, dvars)))
    if isinstance(e, Div):
        da, db = diff(e.left, dvars), diff(e.right, dvars)
        if _is_zero(db):
            return _ZERO if _is_zero(da) else Div(da, e.right)
        return Div(_sub(_mul(da, e.right), _mul(e.left, db)), Pow(e.right, 2))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return _ZERO
        d = diff(e.base, dvars)
        if _is_zero(d):
            return _ZERO
        inner = e.base if e.exponent == 2 else Pow(e.base, e.exponent - 1)
        return _mul(_mul(Num(Fraction(e.exponent)), inner if e.exponent > 1 else _ONE), d)
    if isinstance(e, Re):
        d = diff(e.arg, dvars)
        return _ZERO if _is_zero(d) else Re(d)
    if isinstance(e, Im):
        d = diff(e.arg, dvars)
        return _ZERO if _is_zero(d) else Im(d)
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# expanded form

_CONJ_PAIRS = {"z": "zb", "zb": "z"}


class Poly:
    """Laurent polynomial ``sum c * prod v**k`` over a fixed variable tuple."""

    __slots__ = ("vars", "terms")

    def __init__(self, variables: tuple[str, ...], terms: Mapping[tuple[int, ...], complex] | None = None):
        self.vars = tuple(variables)
        self.terms = {k: complex(c) for k, c in (terms or {}).items() if c != 0}

    @classmethod
    def const(cls, variables, c) -> "Poly":
        return cls(variables, {(0,) * len(variables): c})

    @classmethod
    def var(cls, variables, name) -> "Poly":
        k = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {k: 1.0})

    def __eq__(self, other):
        return isinstance(other, Poly) and self.vars == other.vars and self.terms == other.terms

    def allclose(self, other: "Poly", tol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) <= tol for k in keys)

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return Poly(self.vars, out)

    def scale(self, c: complex) -> "Poly":
        return Poly(self.vars, {k: c * v for k, v in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1)

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict[tuple[int, ...], complex] = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + c1 * c2
        return Poly(self.vars, out)

    def conj(self) -> "Poly":
        idx = {v: i for i, v in enumerate(self.vars)}
        perm = [idx.get(_CONJ_PAIRS.get(v, v)) for v in self.vars]
        if any(p is None for p in perm):
            raise ExprSemanticError("re()/im() need a conjugate pair (z, zb)")
        return Poly(self.vars, {tuple(k[p] for p in perm): c.conjugate() for k, c in self.terms.items()})

    def degree_in(self, name: str) -> int:
        i = self.vars.index(name)
        return max((k[i] for k in self.terms), default=0)

    def substitute(self, name: str, value: complex) -> "Poly":
        """Fix one variable to a number (the variable stays, with exponent 0)."""
        i = self.vars.index(name)
        out: dict[tuple[int, ...], complex] = {}
        for k, c in self.terms.items():
            k2 = k[:i] + (0,) + k[i + 1:]
            out[k2] = out.get(k2, 0) + c * complex(value) ** k[i]
        return Poly(self.vars, out)

    def deriv(self, name: str) -> "Poly":
        """Formal partial derivative treating the variables as independent."""
        i = self.vars.index(name)
        out = {}
        for k, c in self.terms.items():
            if k[i] != 0:
                k2 = k[:i] + (k[i] - 1,) + k[i + 1:]
                out[k2] = out.get(k2, 0) + c * k[i]
        return Poly(self.vars, out)

    def __call__(self, **values):
        """Evaluate on broadcastable arrays keyed by variable name."""
        arrays = [np.asarray(values[v], dtype=complex) if v in values else None for v in self.vars]
        shape = np.broadcast_shapes(*(a.shape for a in arrays if a is not None))
        out = np.zeros(shape, dtype=complex)
        cache: dict[tuple[int, int], np.ndarray] = {}
        for k, c in self.terms.items():
            term = np.full(shape, c, dtype=complex)
            for i, p in enumerate(k):
                if p == 0:
                    continue
                if arrays[i] is None:
                    raise KeyError(f"missing value for {self.vars[i]}")
                key = (i, p)
                if key not in cache:
                    cache[key] = arrays[i] ** p
                term = term * cache[key]
            out = out + term
        return out

    def __repr__(self):
        return f"Poly({self.vars}, {self.terms})"


def expand(e: Expr, variables: tuple[str, ...] = EXPLICIT_VARS) -> Poly:
    if isinstance(e, Num):
        return Poly.const(variables, complex(e.value))
    if isinstance(e, ImagUnit):
        return Poly.const(variables, 1j)
    if isinstance(e, Var):
        if e.name not in variables:
            raise ExprSemanticError(f"unknown variable {e.name!r}")
        return Poly.var(variables, e.name)
    if isinstance(e, Add):
        return expand(e.left, variables) + expand(e.right, variables)
    if isinstance(e, Sub):
        return expand(e.left, variables) - expand(e.right, variables)
    if isinstance(e, Neg):
        return expand(e.arg, variables).scale(-1)
    if isinstance(e, Mul):
        return expand(e.left, variables) * expand(e.right, variables)
    if isinstance(e, Pow):
        base = expand(e.base, variables)
        out = Poly.const(variables, 1.0)
        for _ in range(e.exponent):
            out = out * base
        return out
    if isinstance(e, Div):
        den = expand(e.right, variables)
        if len(den.terms) != 1:
            raise ExprSemanticError("division only by a constant or a monomial in z")
        (k, c), = den.terms.items()
        allowed = {"z", "zb"} if any(k) else set()
        if any(p and v not in allowed for p, v in zip(k, variables)):
            raise ExprSemanticError("division only by a constant or a monomial in z")
        inv = Poly(variables, {tuple(-p for p in k): 1.0 / c})
        return expand(e.left, variables) * inv
    if isinstance(e, Re):
        p = expand(e.arg, variables)
        return (p + p.conj()).scale(0.5)
    if isinstance(e, Im):
        p = expand(e.arg, variables)
        return (p - p.conj()).scale(-0.5j)
    raise TypeError(type(e))
