"""Expression language for scalar fields on the extended phase space.

Coordinates are written ``q1..qn``, ``v1..vn`` (velocities) and ``z1..zq``
(action variables), all 1-based. ``pi`` and ``e`` are constants; any other
identifier is a named parameter. Operator precedence, tightest first::

    ^            right-associative
    unary -
    * /          left-associative
    + -          left-associative

``^`` binds tighter than unary minus, so ``-q1^2`` is ``-(q1^2)``, and its
right operand may itself carry a sign (``2^-1``). Implicit multiplication is
rejected. The grammar is documented in ``docs/expression-language.md``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

from . import dual

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e}
COORD_KINDS = ("q", "v", "z")


class ExpressionError(Exception):
    """Base class for every structured error raised by this module."""


class IllegalCharacter(ExpressionError):
    def __init__(self, position: int, char: str):
        self.position = position
        self.char = char
        super().__init__(f"illegal character {char!r} at position {position}")


class ExprSyntaxError(ExpressionError):
    def __init__(self, position: int, expected: Sequence[str], message: str = ""):
        self.position = position
        self.expected = tuple(sorted(set(expected)))
        detail = message or "expected one of " + ", ".join(self.expected)
        super().__init__(f"syntax error at position {position}: {detail}")


class UnknownFunction(ExpressionError):
    def __init__(self, name: str, position: int = -1):
        self.name = name
        self.position = position
        super().__init__(f"unknown function {name!r} at position {position}")


class UnboundParameter(ExpressionError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"parameter {name!r} has no value")


class DomainError(ExpressionError):
    pass


class IndexOutOfRange(ExpressionError):
    def __init__(self, kind: str, index: int, limit: int):
        self.kind, self.index, self.limit = kind, index, limit
        super().__init__(f"coordinate {kind}{index} out of range (1..{limit})")


# --------------------------------------------------------------------------- tokens

@dataclass(frozen=True)
class Token:
    kind: str  # number | identifier | operator | paren | comma
    lexeme: str
    position: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+)
  | (?P<number>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<identifier>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<operator>[-+*/^])
  | (?P<paren>[()])
  | (?P<comma>,)
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise IllegalCharacter(pos, source[pos])
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    return tokens


# --------------------------------------------------------------------------- AST

@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class CoordVar:
    kind: str
    index: int


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    child: "Expr"


Expr = Union[Constant, CoordVar, Param, Unary, Binary, Call]

_COORD_RE = re.compile(r"([qvz])([0-9]+)\Z")

# binding powers: (left, right)
_INFIX = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (41, 30)}
_PREFIX_BP = 30


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def end_pos(self) -> int:
        return len(self.source)

    def pos(self) -> int:
        tok = self.peek()
        return tok.position if tok else self.end_pos()

    def expect(self, lexeme: str) -> Token:
        tok = self.peek()
        if tok is None or tok.lexeme != lexeme:
            raise ExprSyntaxError(self.pos(), [lexeme])
        self.i += 1
        return tok

    def parse(self) -> Expr:
        node = self.expression(0)
        tok = self.peek()
        if tok is not None:
            raise ExprSyntaxError(tok.position, ["operator", "end of input"])
        return node

    def expression(self, min_bp: int) -> Expr:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok is None or tok.kind != "operator":
                if tok is not None and tok.kind in ("number", "identifier") or (
                        tok is not None and tok.lexeme == "("):
                    raise ExprSyntaxError(tok.position, ["operator", ")", "end of input"],
                                          "implicit multiplication is not allowed")
                return left
            lbp, rbp = _INFIX[tok.lexeme]
            if lbp < min_bp:
                return left
            self.i += 1
            right = self.expression(rbp)
            left = Binary(tok.lexeme, left, right)

    def prefix(self) -> Expr:
        tok = self.peek()
        starts = ["number", "identifier", "(", "-"]
        if tok is None:
            raise ExprSyntaxError(self.end_pos(), starts)
        if tok.lexeme == "-":
            self.i += 1
            return Unary("neg", self.expression(_PREFIX_BP))
        if tok.lexeme == "(":
            self.i += 1
            inner = self.expression(0)
            self.expect(")")
            return inner
        if tok.kind == "number":
            self.i += 1
            value = float(tok.lexeme)
            if not math.isfinite(value):
                raise ExprSyntaxError(tok.position, ["finite number"], "number literal overflows")
            return Constant(value)
        if tok.kind == "identifier":
            self.i += 1
            return self.identifier(tok)
        raise ExprSyntaxError(tok.position, starts)

    def identifier(self, tok: Token) -> Expr:
        name = tok.lexeme
        nxt = self.peek()
        if nxt is not None and nxt.lexeme == "(":
            if name not in FUNCTIONS:
                raise UnknownFunction(name, tok.position)
            self.i += 1
            arg = self.expression(0)
            self.expect(")")
            return Call(name, arg)
        if name in FUNCTIONS:
            raise ExprSyntaxError(self.pos(), ["("], f"function {name!r} needs an argument")
        m = _COORD_RE.match(name)
        if m:
            index = int(m.group(2))
            if index < 1:
                raise ExprSyntaxError(tok.position, ["index >= 1"],
                                      "coordinate indices are 1-based")
            return CoordVar(m.group(1), index)
        if name in CONSTANTS:
            return Constant(CONSTANTS[name])
        return Param(name)


def parse_expression(source: str) -> Expr:
    try:
        return _Parser(source).parse()
    except RecursionError:
        raise ExprSyntaxError(0, [], "expression nested too deeply") from None


# --------------------------------------------------------------------------- printing

def _prec(node: Expr) -> int:
    if isinstance(node, Binary):
        return {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}[node.op]
    if isinstance(node, Unary):
        return 30
    return 50


def to_text(node: Expr) -> str:
    """Print with the minimum parentheses needed to re-parse to the same tree."""
    if isinstance(node, Constant):
        if node.value == math.pi:
            return "pi"
        if node.value == math.e:
            return "e"
        value = float(node.value)
        text = str(int(value)) if value.is_integer() and abs(value) < 1e15 else repr(value)
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, CoordVar):
        return f"{node.kind}{node.index}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({to_text(node.child)})"
    if isinstance(node, Unary):
        inner = to_text(node.child)
        if _prec(node.child) < 30:
            inner = f"({inner})"
        return f"-{inner}"
    p = _prec(node)
    left, right = to_text(node.left), to_text(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < 30:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def dump(node: Expr) -> str:
    """Indented tree rendering, used by the ``parse`` CLI subcommand."""
    lines: list[str] = []

    def walk(n: Expr, depth: int) -> None:
        pad = "  " * depth
        if isinstance(n, Binary):
            lines.append(f"{pad}Binary({n.op})")
            walk(n.left, depth + 1)
            walk(n.right, depth + 1)
        elif isinstance(n, Unary):
            lines.append(f"{pad}Unary({n.op})")
            walk(n.child, depth + 1)
        elif isinstance(n, Call):
            lines.append(f"{pad}Call({n.fn})")
            walk(n.child, depth + 1)
        elif isinstance(n, CoordVar):
            lines.append(f"{pad}CoordVar({n.kind}, {n.index})")
        elif isinstance(n, Param):
            lines.append(f"{pad}Param({n.name})")
        else:
            lines.append(f"{pad}Constant({n.value!r})")

    walk(node, 0)
    return "\n".join(lines)


def free_symbols(node: Expr) -> tuple[set[tuple[str, int]], set[str]]:
    coords: set[tuple[str, int]] = set()
    params: set[str] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, CoordVar):
            coords.add((n.kind, n.index))
        elif isinstance(n, Param):
            params.add(n.name)
        elif isinstance(n, (Unary, Call)):
            stack.append(n.child)
        elif isinstance(n, Binary):
            stack.extend((n.left, n.right))
    return coords, params


# --------------------------------------------------------------------------- evaluation

_FUNCS: dict[str, Callable] = {
    "sin": dual.sin, "cos": dual.cos, "exp": dual.exp, "log": dual.log,
    "sqrt": dual.sqrt, "tanh": dual.tanh, "abs": dual.absolute,
}


def coord_offset(kind: str, index: int, n: int, qcount: int) -> int:
    limit = qcount if kind == "z" else n
    if index > limit:
        raise IndexOutOfRange(kind, index, limit)
    return {"q": 0, "v": n, "z": 2 * n}[kind] + index - 1


def compile_expr(node: Expr, n: int, qcount: int,
                 params: Mapping[str, float]) -> Callable[[Sequence], object]:
    """Bind ``node`` to dimensions and parameter values.

    The returned function maps a coordinate sequence (floats or hyper-duals,
    ordered q, v, z) to the field value. Binding errors surface here.
    """

    def build(n_: Expr) -> Callable:
        if isinstance(n_, Constant):
            c = n_.value
            return lambda x: c
        if isinstance(n_, CoordVar):
            k = coord_offset(n_.kind, n_.index, n, qcount)
            return lambda x: x[k]
        if isinstance(n_, Param):
            if n_.name not in params:
                raise UnboundParameter(n_.name)
            c = float(params[n_.name])
            return lambda x: c
        if isinstance(n_, Unary):
            f = build(n_.child)
            return lambda x: -f(x)
        if isinstance(n_, Call):
            f = build(n_.child)
            g = _FUNCS[n_.fn]
            name = n_.fn

            def call(x):
                arg = f(x)
                try:
                    return g(arg)
                except (ValueError, ZeroDivisionError, OverflowError) as exc:
                    raise DomainError(f"{name}({dual.real_part(arg)!r}): {exc}") from None
            return call
        f, g = build(n_.left), build(n_.right)
        op = n_.op
        if op == "+":
            return lambda x: f(x) + g(x)
        if op == "-":
            return lambda x: f(x) - g(x)
        if op == "*":
            return lambda x: f(x) * g(x)

        def slow(x):
            a, b = f(x), g(x)
            try:
                if op == "/":
                    if dual.real_part(b) == 0.0:
                        raise ZeroDivisionError("division by zero")
                    return a / b
                return dual.power(a, b)
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise DomainError(f"{op}: {exc}") from None
        return slow

    body = build(node)

    def evaluate_coords(coords: Sequence):
        out = body(coords)
        if not math.isfinite(dual.real_part(out)):
            raise DomainError("expression evaluates to a non-finite value")
        return out

    return evaluate_coords


def evaluate(node: Expr, point, params: Mapping[str, float] | None = None) -> float:
    """Evaluate at an :class:`~qcontact.calculus.ExtendedPoint`."""
    fn = compile_expr(node, point.n, point.qcount, params or {})
    return float(fn([float(c) for c in point.coords]))


def as_expr(source: Union[str, Expr]) -> Expr:
    return parse_expression(source) if isinstance(source, str) else source
