"""Arithmetic expressions over latent variables z1, z2, ...

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | 'z' digits | 'exp' '(' expr ')' | '(' expr ')'

Negation binds looser than '^', so ``-z1^2`` is ``-(z1^2)``, and '^' is
right-associative with an optionally negated exponent (``2^-1``).
"""
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ExpressionSyntaxError, UnknownVariable


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>z\d+)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)

FUNCTIONS = ("exp",)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ExpressionSyntaxError(msg, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            self.fail(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        kind, val, pos = tok
        if kind == "num":
            self.take()
            v = float(val)
            if not math.isfinite(v):
                self.fail(f"numeric literal {val!r} overflows", tok)
            return Num(v)
        if kind == "var":
            self.take()
            k = int(val[1:])
            if k < 1:
                self.fail("variable indices start at z1", tok)
            return Var(k)
        if kind == "name":
            if val not in FUNCTIONS:
                self.fail(f"unknown name {val!r}", tok)
            self.take()
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Call(val, arg)
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected {val or 'end of input'!r}", tok)


def parse_expression(text):
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0, text or "")
    return _Parser(text).parse()


def max_variable(node):
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return 0
    if isinstance(node, (Neg, Call)):
        return max_variable(node.operand if isinstance(node, Neg) else node.arg)
    return max(max_variable(node.left), max_variable(node.right))


def bind(node, d):
    """Check that every variable index lies in 1..d."""
    k = max_variable(node)
    if k > d:
        raise UnknownVariable(f"z{k} used but latent dimension is {d}")
    return node


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def _fmt_num(v):
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def unparse(node):
    """Text form with only the parentheses the grammar needs."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return f"z{node.index}"
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    if isinstance(node, Neg):
        inner = unparse(node.operand)
        if _prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left = unparse(node.left)
    right = unparse(node.right)
    if node.op == "^":
        # base must be an atom; exponent may be a unary or another power
        if _prec(node.left) < 5:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    # left-associative: an equal-precedence right child needs parentheses
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def _eval(node, z):
    if isinstance(node, Num):
        return np.full(z.shape[0], node.value)
    if isinstance(node, Var):
        return z[:, node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, z)
    if isinstance(node, Call):
        with np.errstate(over="ignore"):
            return np.exp(_eval(node.arg, z))
    a = _eval(node.left, z)
    b = _eval(node.right, z)
    with np.errstate(all="ignore"):
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            zero = np.flatnonzero(b == 0)
            if zero.size:
                raise EvaluationError("division by zero", int(zero[0]))
            return a / b
        return np.power(a, b)


def eval_many(node, z):
    """Evaluate over the rows of ``z`` (shape (n, d)); raises on non-finite results."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    need = max_variable(node)
    if z.shape[1] < need:
        raise UnknownVariable(f"z{need} used but only {z.shape[1]} values supplied")
    out = _eval(node, z)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise EvaluationError("non-finite result (overflow or invalid power)", int(bad[0]))
    return out


def eval_expression(node, z):
    """Evaluate at a single latent vector ``z``."""
    z = np.asarray(z, dtype=float).reshape(1, -1)
    try:
        return float(eval_many(node, z)[0])
    except EvaluationError as exc:
        raise EvaluationError(exc.message) from None
