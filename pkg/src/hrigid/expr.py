"""Closed-form expressions over x and y.

A small recursive-descent parser turns text such as ``"1 + 2*x + 3*y"`` or
``"2 + 3*abs(x - 1)^0.5"`` into an immutable syntax tree.  Trees evaluate
element-wise on numpy arrays and refuse to produce complex or non-finite
values: such points raise :class:`~hrigid.errors.DomainError` instead.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``*`` and ``/``; ``^`` is right associative)::

    expr   = term   { ("+" | "-") term } ;
    term   = unary  { ("*" | "/") unary } ;
    unary  = "-" unary | power ;
    power  = atom   [ "^" unary ] ;
    atom   = number | name | name "(" expr { "," expr } ")" | "(" expr ")" ;
    name   = "x" | "y" | "pi" | "e" | function name ;
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifier

__all__ = [
    "Expression",
    "Num",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ScalarField",
    "parse",
    "evaluate",
    "FUNCTIONS",
    "CONSTANTS",
]

VARIABLES = ("x", "y")
CONSTANTS = {"pi": math.pi, "e": math.e}
# name -> arity
FUNCTIONS = {
    "exp": 1,
    "ln": 1,
    "abs": 1,
    "sqrt": 1,
    "sin": 1,
    "cos": 1,
    "arctan": 1,
    "pow": 2,
}


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------


class Expression:
    """Base class of syntax-tree nodes."""

    def evaluate(self, x, y=0.0):
        """Evaluate element-wise; arrays broadcast against each other."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(x, y)
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise DomainError(f"non-finite value of {self}")
        return out

    def variables(self) -> frozenset:
        return frozenset()

    def substitute(self, mapping: Mapping[str, "Expression"]) -> "Expression":
        return self

    def _eval(self, x, y):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Num(Expression):
    value: float

    def _eval(self, x, y):
        return np.full(np.broadcast(x, y).shape, self.value)

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Const(Expression):
    name: str

    def _eval(self, x, y):
        return np.full(np.broadcast(x, y).shape, CONSTANTS[self.name])

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Var(Expression):
    name: str

    def _eval(self, x, y):
        v = x if self.name == "x" else y
        return np.broadcast_to(v, np.broadcast(x, y).shape)

    def variables(self):
        return frozenset([self.name])

    def substitute(self, mapping):
        return mapping.get(self.name, self)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression

    def _eval(self, x, y):
        return -self.arg._eval(x, y)

    def variables(self):
        return self.arg.variables()

    def substitute(self, mapping):
        return Neg(self.arg.substitute(mapping))

    def __str__(self):
        return f"(-{self.arg})"


def _power(base, expo):
    base, expo = np.broadcast_arrays(base, expo)
    fractional = expo != np.floor(expo)
    if np.any((base < 0) & fractional):
        raise DomainError("negative base raised to a non-integer power")
    if np.any((base == 0) & (expo < 0)):
        raise DomainError("zero raised to a negative power")
    return np.power(base, expo)


def _divide(num, den):
    if np.any(den == 0):
        raise DomainError("division by zero")
    return num / den


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": _divide,
    "^": _power,
}


@dataclass(frozen=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression

    def _eval(self, x, y):
        return _BINARY[self.op](self.left._eval(x, y), self.right._eval(x, y))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def substitute(self, mapping):
        return BinOp(self.op, self.left.substitute(mapping), self.right.substitute(mapping))

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


def _ln(a):
    if np.any(a <= 0):
        raise DomainError("ln of a non-positive value")
    return np.log(a)


def _sqrt(a):
    if np.any(a < 0):
        raise DomainError("sqrt of a negative value")
    return np.sqrt(a)


_CALLS = {
    "exp": np.exp,
    "ln": _ln,
    "abs": np.abs,
    "sqrt": _sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "arctan": np.arctan,
    "pow": _power,
}


@dataclass(frozen=True)
class Call(Expression):
    name: str
    args: tuple

    def _eval(self, x, y):
        return _CALLS[self.name](*(a._eval(x, y) for a in self.args))

    def variables(self):
        out = frozenset()
        for a in self.args:
            out |= a.variables()
        return out

    def substitute(self, mapping):
        return Call(self.name, tuple(a.substitute(mapping) for a in self.args))

    def __str__(self):
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(source):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.lastgroup is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos,
                             "number, name, operator or parenthesis")
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value, expected):
        kind, text, pos = self.tok
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"unexpected {found}", pos, expected)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, text, pos = self.tok
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos, "operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok[0] == "op" and self.tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.tok
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            if self.tok[0] == "op" and self.tok[1] == "(":
                return self.call(text, pos)
            if text in VARIABLES:
                return Var(text)
            if text in CONSTANTS:
                return Const(text)
            if text in FUNCTIONS:
                raise ParseError(f"function {text!r} needs an argument list",
                                 self.tok[2], "'('")
            raise UnknownIdentifier(f"unknown identifier {text!r}", pos,
                                    "x, y, pi, e or a function call")
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            self.expect(")", "')'")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", pos, "number, name or '('")

    def call(self, name, pos):
        if name not in FUNCTIONS:
            raise UnknownIdentifier(f"unknown function {name!r}", pos,
                                    ", ".join(sorted(FUNCTIONS)))
        self.expect("(", "'('")
        args = [self.expr()]
        while self.tok[0] == "op" and self.tok[1] == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")", "')' or ','")
        if len(args) != FUNCTIONS[name]:
            raise ParseError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", pos)
        return Call(name, tuple(args))


def parse(source: str) -> Expression:
    """Parse ``source`` into an :class:`Expression` tree.

    Raises :class:`ParseError` (with ``position`` and ``expected``) for
    malformed text and :class:`UnknownIdentifier` for names other than the
    variables x, y, the constants pi, e and the supported functions.
    """
    if not isinstance(source, str) or not source.strip():
        raise ParseError("empty expression", 0, "an expression")
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """A function of one (``g(x)``) or two (``f(x, y)``) real variables."""

    expression: Expression
    arity: int = 2

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ValueError("arity must be 1 or 2")
        if self.arity == 1 and "y" in self.expression.variables():
            raise UnknownIdentifier("variable 'y' in a one-variable field", None, "x")

    @classmethod
    def from_source(cls, source: str, arity: int = 2) -> "ScalarField":
        return cls(parse(source), arity)

    @property
    def source(self) -> str:
        return str(self.expression)

    def __call__(self, x, y=0.0):
        if self.arity == 1:
            y = 0.0
        return self.expression.evaluate(x, y)

    def restrict_y(self, y0: float = 0.0) -> "ScalarField":
        """The one-variable field ``x -> f(x, y0)``."""
        return ScalarField(self.expression.substitute({"y": Num(float(y0))}), 1)

    def rescaled(self, c: float) -> "ScalarField":
        """The field ``f(c * .)``."""
        mapping = {v: BinOp("*", Num(float(c)), Var(v)) for v in VARIABLES}
        return ScalarField(self.expression.substitute(mapping), self.arity)

    def __str__(self):
        return self.source


FieldLike = Union[ScalarField, str]


def as_field(field: FieldLike, arity: int = 2) -> ScalarField:
    if isinstance(field, ScalarField):
        return field
    return ScalarField.from_source(field, arity)


def evaluate(field: FieldLike, point) -> float:
    """Value of ``field`` at ``point`` (a pair; arity-1 fields ignore y)."""
    field = as_field(field)
    x, y = (tuple(point) + (0.0,))[:2]
    return float(field(float(x), float(y)))
