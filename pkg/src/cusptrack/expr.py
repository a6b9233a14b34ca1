"""Complex scalar expressions in x and y for matrix entries.

Recursive-descent parser with precedence climbing over the grammar

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 'i' | 'x' | 'y' | 'pi' | 'e'
            | FUNC '(' expr ')' | '(' expr ')'

'i' is the imaginary unit; implicit multiplication is rejected ("2x", "3i").
Exponents must evaluate to integers. All errors carry a byte offset into the
source text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EvalError, ParseError

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs", "re", "im", "conj")
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
    |(?P<name>[A-Za-z_][A-Za-z_0-9]*)
    |(?P<op>[-+*/^()])
    |(?P<ws>\s+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | name | op | end
    text: str
    offset: int


def _byte_offset(src: str, char_pos: int) -> int:
    return len(src[:char_pos].encode("utf-8"))


def tokenize(src: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(
                f"lexical error: unexpected character {src[pos]!r}", _byte_offset(src, pos)
            )
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(), _byte_offset(src, m.start())))
    tokens.append(Token("end", "", _byte_offset(src, len(src))))
    return tokens


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Expr:
    offset: int = field(compare=False, kw_only=True, default=0)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class ImagUnit(Expr):
    pass


@dataclass(frozen=True)
class Const(Expr):
    name: str  # "pi" | "e"


@dataclass(frozen=True)
class Var(Expr):
    name: str  # "x" | "y"


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = tokenize(src)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def expect_op(self, op: str):
        if self.tok.kind == "op" and self.tok.text == op:
            return self.advance()
        raise ParseError(f"syntax error: expected {op!r}", self.tok.offset)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(
                f"syntax error: unexpected {self.tok.text!r}", self.tok.offset
            )
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance()
            right = self.term()
            left = BinOp(op.text, left, right, offset=op.offset)
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance()
            right = self.unary()
            left = BinOp(op.text, left, right, offset=op.offset)
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            op = self.advance()
            return Neg(self.unary(), offset=op.offset)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            op = self.advance()
            exponent = self.unary()  # right-associative, allows 2^-3
            return BinOp("^", base, exponent, offset=op.offset)
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text), offset=t.offset)
        if t.kind == "name":
            self.advance()
            if t.text == "i":
                return ImagUnit(offset=t.offset)
            if t.text in ("x", "y"):
                return Var(t.text, offset=t.offset)
            if t.text in CONSTANTS:
                return Const(t.text, offset=t.offset)
            if t.text in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(t.text, arg, offset=t.offset)
            raise ParseError(f"syntax error: unknown name {t.text!r}", t.offset)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(
            f"syntax error: unexpected {'end of input' if t.kind == 'end' else repr(t.text)}",
            t.offset,
        )


def parse(src: str) -> Expr:
    return _Parser(src).parse()


# ---------------------------------------------------------------------------
# Evaluation.  Values are complex128 scalars or arrays; numpy functions give
# the principal branch for sqrt on either.

_FUNC_IMPL = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "re": np.real,
    "im": np.imag,
    "conj": np.conj,
}


def _as_int_exponent(value, offset: int) -> int:
    v = np.asarray(value)
    if v.size != 1:
        raise EvalError("evaluation error: array-valued exponent", offset)
    z = complex(v.reshape(-1)[0])
    if z.imag != 0.0 or z.real != round(z.real):
        raise EvalError("evaluation error: non-integer exponent", offset)
    return int(round(z.real))


def _eval(e: Expr, x, y):
    if isinstance(e, Num):
        return np.complex128(e.value)
    if isinstance(e, ImagUnit):
        return np.complex128(1j)
    if isinstance(e, Const):
        return np.complex128(CONSTANTS[e.name])
    if isinstance(e, Var):
        return x if e.name == "x" else y
    if isinstance(e, Neg):
        return -_eval(e.operand, x, y)
    if isinstance(e, Call):
        val = _FUNC_IMPL[e.func](_eval(e.arg, x, y))
        return np.asarray(val, dtype=np.complex128) if isinstance(val, np.ndarray) else np.complex128(val)
    if isinstance(e, BinOp):
        if e.op == "^":
            base = _eval(e.left, x, y)
            k = _as_int_exponent(_eval(e.right, x, y), e.offset)
            if k < 0 and np.any(base == 0):
                raise EvalError("evaluation error: division by zero", e.offset)
            return base ** k
        lhs = _eval(e.left, x, y)
        rhs = _eval(e.right, x, y)
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if np.any(rhs == 0):
            raise EvalError("evaluation error: division by zero", e.offset)
        return lhs / rhs
    raise TypeError(f"unknown node {e!r}")


def evaluate(e: Expr, x: float, y: float) -> complex:
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError("evaluation point must be finite")
    return complex(_eval(e, np.complex128(x), np.complex128(y)))


def evaluate_many(e: Expr, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized evaluation over sample arrays; returns complex128 array."""
    xs = np.asarray(xs, dtype=np.complex128)
    ys = np.asarray(ys, dtype=np.complex128)
    out = _eval(e, xs, ys)
    return np.broadcast_to(np.asarray(out, dtype=np.complex128), xs.shape).copy()


def as_callable(e: Expr):
    """Adapter to an entry function (x, y) -> value, scalar or array."""

    def fn(x, y):
        return _eval(e, x, y)

    return fn


# ---------------------------------------------------------------------------
# Printing with minimal parentheses; print -> parse is structure-preserving.

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def _wrap(text: str, need: bool) -> str:
    return f"({text})" if need else text


def to_source(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, ImagUnit):
        return "i"
    if isinstance(e, (Const, Var)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.operand)
        return "-" + _wrap(inner, _prec(e.operand) < _PREC["neg"])
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = to_source(e.left)
        right = to_source(e.right)
        if e.op == "^":
            # right-associative: parenthesize an equal-precedence left child
            return _wrap(left, _prec(e.left) <= p) + "^" + _wrap(right, _prec(e.right) < _PREC["neg"])
        # left-associative: parenthesize an equal-precedence right child
        return (
            _wrap(left, _prec(e.left) < p)
            + e.op
            + _wrap(right, _prec(e.right) <= p)
        )
    raise TypeError(f"unknown node {e!r}")
