"""A small expression language: parsing, printing, evaluation, exact differentiation.

Trees are immutable values.  Evaluation is plain IEEE double arithmetic with a
fixed left-to-right child order, so the same tree with the same bindings always
produces a bit-identical result.  There is no simplifier: the only rewriting
ever performed is folding of all-literal subtrees when new nodes are built by
`diff` or `subst`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

__all__ = [
    "Expr", "Const", "Var", "Neg", "BinOp", "Call",
    "Bindings", "ExprError", "ParseError", "EvalError",
    "FUNCTIONS", "as_expr", "parse", "evaluate", "diff", "subst",
    "variables", "to_text",
]

Bindings = Mapping[str, float]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"syntax error at offset {offset}: {message}")
        self.offset = offset


class EvalError(ExprError):
    def __init__(self, message: str, node: "Expr"):
        super().__init__(f"{message} in `{to_text(node)}`")
        self.node = node


class Expr:
    """Base node.  Operator overloads build trees without folding."""

    def __add__(self, other):
        return BinOp("+", self, as_expr(other))

    def __radd__(self, other):
        return BinOp("+", as_expr(other), self)

    def __sub__(self, other):
        return BinOp("-", self, as_expr(other))

    def __rsub__(self, other):
        return BinOp("-", as_expr(other), self)

    def __mul__(self, other):
        return BinOp("*", self, as_expr(other))

    def __rmul__(self, other):
        return BinOp("*", as_expr(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return BinOp("/", as_expr(other), self)

    def __pow__(self, other):
        return BinOp("^", self, as_expr(other))

    def __rpow__(self, other):
        return BinOp("^", as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


def as_expr(v: Union[Expr, int, float]) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float)):
        return Const(float(v))
    raise TypeError(f"cannot coerce {type(v).__name__} to Expr")


# ---------------------------------------------------------------------------
# parsing

_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(
    rf"(?P<ws>\s+)|(?P<num>{_NUM})|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[+\-*/^()])"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(pos, f"unexpected character {text[pos]!r}")
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group(), m.start()))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def advance(self) -> tuple[str, str, int]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str) -> None:
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            got = repr(val) if kind != "end" else "end of input"
            raise ParseError(off, f"expected {op!r}, found {got}")
        self.advance()

    # expr := term (('+'|'-') term)*
    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                e = BinOp(val, e, self.term())
            else:
                return e

    # term := factor (('*'|'/') factor)*
    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                e = BinOp(val, e, self.factor())
            else:
                return e

    # factor := '-' factor | base ('^' factor)?
    # Unary minus binds looser than '^', so -x^2 parses as -(x^2).
    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.factor())
        b = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return BinOp("^", b, self.factor())
        return b

    # base := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
    def base(self) -> Expr:
        kind, val, off = self.peek()
        if kind == "num":
            self.advance()
            return Const(float(val))
        if kind == "name":
            self.advance()
            k2, v2, _ = self.peek()
            if k2 == "op" and v2 == "(":
                if val not in FUNCTIONS:
                    raise ParseError(off, f"unknown function {val!r}")
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(val, arg)
            return Var(val)
        if kind == "op" and val == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        got = repr(val) if kind != "end" else "end of input"
        raise ParseError(off, f"expected a number, identifier or '(', found {got}")


def parse(text: str) -> Expr:
    """Parse a formula into its unique tree under the grammar's precedence."""
    p = _Parser(text)
    e = p.expr()
    kind, val, off = p.peek()
    if kind != "end":
        raise ParseError(off, f"expected end of input, found {val!r}")
    return e


# ---------------------------------------------------------------------------
# evaluation

def _guard_sqrt(v: float, node: Expr) -> float:
    if v < 0.0:
        raise EvalError(f"sqrt of negative value {v!r}", node)
    return math.sqrt(v)


def _guard_ln(v: float, node: Expr) -> float:
    if v <= 0.0:
        raise EvalError(f"ln of non-positive value {v!r}", node)
    return math.log(v)


def _overflowing(fn: Callable[[float], float]):
    def apply(v: float, node: Expr) -> float:
        try:
            return fn(v)
        except OverflowError:
            raise EvalError("overflow", node) from None
    return apply


FUNCTIONS: dict[str, Callable[[float, Expr], float]] = {
    "sqrt": _guard_sqrt,
    "exp": _overflowing(math.exp),
    "ln": _guard_ln,
    "sin": lambda v, n: math.sin(v),
    "cos": lambda v, n: math.cos(v),
    "sinh": _overflowing(math.sinh),
    "cosh": _overflowing(math.cosh),
    "arctan": lambda v, n: math.atan(v),
    "abs": lambda v, n: abs(v),
}


def _power(base: float, expo: float, node: Expr) -> float:
    # Integer exponents use repeated multiplication, so negative bases are fine.
    if math.isfinite(expo) and expo == math.floor(expo) and abs(expo) <= 2**31:
        n = int(expo)
        if n == 0:
            return 1.0
        k = abs(n)
        if k <= 64:
            r = 1.0
            for _ in range(k):
                r *= base
        else:
            try:
                r = math.pow(abs(base), k)
            except OverflowError:
                raise EvalError("overflow in power", node) from None
            if base < 0.0 and k % 2 == 1:
                r = -r
        if n < 0:
            if r == 0.0:
                raise EvalError("zero base with negative exponent", node)
            r = 1.0 / r
        return r
    if base <= 0.0:
        raise EvalError(
            f"power with non-integer exponent requires a positive base, got {base!r}", node
        )
    try:
        return math.pow(base, expo)
    except OverflowError:
        raise EvalError("overflow in power", node) from None


def evaluate(e: Expr, bindings: Bindings) -> float:
    """Evaluate a tree at the given variable bindings.

    Unbound variables and domain violations (sqrt of a negative, ln of a
    non-positive, division by zero) raise EvalError naming the offending
    subtree.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}", e) from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, bindings)
    if isinstance(e, BinOp):
        a = evaluate(e.left, bindings)
        b = evaluate(e.right, bindings)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise EvalError("division by zero", e)
            return a / b
        if op == "^":
            return _power(a, b, e)
        raise EvalError(f"unknown operator {op!r}", e)
    if isinstance(e, Call):
        v = evaluate(e.arg, bindings)
        return FUNCTIONS[e.func](v, e)
    raise TypeError(f"not an Expr node: {e!r}")


def variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Neg):
        return variables(e.arg)
    if isinstance(e, Call):
        return variables(e.arg)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    raise TypeError(f"not an Expr node: {e!r}")


# ---------------------------------------------------------------------------
# construction helpers that fold all-literal subtrees (and nothing else)

def _fold2(op: str, a: Expr, b: Expr) -> Expr:
    node = BinOp(op, a, b)
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(evaluate(node, {}))
        except EvalError:
            return node
    return node


def _fold_call(func: str, a: Expr) -> Expr:
    node = Call(func, a)
    if isinstance(a, Const):
        try:
            return Const(evaluate(node, {}))
        except EvalError:
            return node
    return node


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    return Neg(a)


def _add(a, b):
    return _fold2("+", a, b)


def _sub(a, b):
    return _fold2("-", a, b)


def _mul(a, b):
    return _fold2("*", a, b)


def _div(a, b):
    return _fold2("/", a, b)


def _pow(a, b):
    return _fold2("^", a, b)


# ---------------------------------------------------------------------------
# differentiation

_DERIVATIVES: dict[str, Callable[[Expr, Expr], Expr]] = {
    "sqrt": lambda a, da: _div(da, _mul(Const(2.0), Call("sqrt", a))),
    "exp": lambda a, da: _mul(Call("exp", a), da),
    "ln": lambda a, da: _div(da, a),
    "sin": lambda a, da: _mul(Call("cos", a), da),
    "cos": lambda a, da: _neg(_mul(Call("sin", a), da)),
    "sinh": lambda a, da: _mul(Call("cosh", a), da),
    "cosh": lambda a, da: _mul(Call("sinh", a), da),
    "arctan": lambda a, da: _div(da, _add(Const(1.0), _mul(a, a))),
    # d|f| = (f/|f|) f'; evaluating at f = 0 reports the kink as a domain error
    "abs": lambda a, da: _mul(_div(a, Call("abs", a)), da),
}


def diff(e: Expr, name: str) -> Expr:
    """Exact derivative tree with respect to `name`.

    Subtrees free of the variable differentiate to the zero constant, so the
    result only ever mentions variables that appear in `e`.
    """
    if name not in variables(e):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0)
    if isinstance(e, Neg):
        return _neg(diff(e.arg, name))
    if isinstance(e, BinOp):
        l, r = e.left, e.right
        if e.op == "+":
            return _add(diff(l, name), diff(r, name))
        if e.op == "-":
            return _sub(diff(l, name), diff(r, name))
        if e.op == "*":
            return _add(_mul(diff(l, name), r), _mul(l, diff(r, name)))
        if e.op == "/":
            num = _sub(_mul(diff(l, name), r), _mul(l, diff(r, name)))
            return _div(num, _mul(r, r))
        if e.op == "^":
            if name not in variables(r):
                # power rule with a var-free exponent
                em1 = _sub(r, Const(1.0))
                return _mul(_mul(r, _pow(l, em1)), diff(l, name))
            if name not in variables(l):
                # pure exponential a^g
                return _mul(_mul(BinOp("^", l, r), Call("ln", l)), diff(r, name))
            inner = _add(_mul(diff(r, name), Call("ln", l)),
                         _div(_mul(r, diff(l, name)), l))
            return _mul(BinOp("^", l, r), inner)
        raise ExprError(f"unknown operator {e.op!r}")
    if isinstance(e, Call):
        return _DERIVATIVES[e.func](e.arg, diff(e.arg, name))
    raise TypeError(f"not an Expr node: {e!r}")


def subst(e: Expr, mapping: Mapping[str, Union[Expr, int, float]]) -> Expr:
    """Replace variables by expressions or constants, folding literal subtrees."""
    repl = {k: as_expr(v) for k, v in mapping.items()}

    def go(t: Expr) -> Expr:
        if isinstance(t, Var):
            return repl.get(t.name, t)
        if isinstance(t, Const):
            return t
        if isinstance(t, Neg):
            return _neg(go(t.arg))
        if isinstance(t, BinOp):
            return _fold2(t.op, go(t.left), go(t.right))
        if isinstance(t, Call):
            return _fold_call(t.func, go(t.arg))
        raise TypeError(f"not an Expr node: {t!r}")

    return go(e)


# ---------------------------------------------------------------------------
# printing

# Levels mirror the grammar: 1 expr (+,-), 2 term (*,/), 3 factor (unary -),
# 4 power, 5 base.  A child is parenthesized when its level is below the
# minimum its slot requires, which makes parse(to_text(parse(s))) == parse(s).

def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        neg = e.value < 0 or (e.value == 0.0 and math.copysign(1.0, e.value) < 0)
        return 3 if neg else 5
    if isinstance(e, (Var, Call)):
        return 5
    if isinstance(e, Neg):
        return 3
    if isinstance(e, BinOp):
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[e.op]
    raise TypeError(f"not an Expr node: {e!r}")


def _fmt_magnitude(v: float) -> str:
    if math.isfinite(v) and v == math.floor(v) and abs(v) < 1e16:
        return repr(int(v))
    return repr(v)


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_text(e)
    return f"({s})" if _prec(e) < min_prec else s


def to_text(e: Expr) -> str:
    if isinstance(e, Const):
        v = e.value
        if v < 0 or (v == 0.0 and math.copysign(1.0, v) < 0):
            return "-" + _fmt_magnitude(-v)
        return _fmt_magnitude(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, 3)
    if isinstance(e, BinOp):
        l, r = e.left, e.right
        if e.op in "+-":
            return f"{_wrap(l, 1)}{e.op}{_wrap(r, 2)}"
        if e.op in "*/":
            return f"{_wrap(l, 2)}{e.op}{_wrap(r, 3)}"
        if e.op == "^":
            return f"{_wrap(l, 5)}^{_wrap(r, 3)}"
    raise TypeError(f"not an Expr node: {e!r}")
