"""Runtime math expressions over the coordinates ``x, y, z`` and time ``t``.

Expressions are tokenized, parsed with a precedence-climbing (Pratt) parser
into a small AST, and compiled into closures that evaluate elementwise on
numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from ..errors import EvaluationError, ParseError

COORDS = ("x", "y", "z", "t")


def _coth(a):
    return 1.0 / np.tanh(a)


def _sqrt(a):
    if np.any(np.asarray(a) < 0):
        raise EvaluationError("sqrt of a negative number")
    return np.sqrt(a)


def _log(a):
    if np.any(np.asarray(a) <= 0):
        raise EvaluationError("log of a non-positive number")
    return np.log(a)


def _if(c, a, b):
    return np.where(np.asarray(c) != 0, a, b)


FUNCTIONS = {
    "sqrt": (_sqrt, 1),
    "sin": (np.sin, 1),
    "cos": (np.cos, 1),
    "tan": (np.tan, 1),
    "exp": (np.exp, 1),
    "log": (_log, 1),
    "abs": (np.abs, 1),
    "tanh": (np.tanh, 1),
    "coth": (_coth, 1),
    "atan": (np.arctan, 1),
    "min": (np.minimum, 2),
    "max": (np.maximum, 2),
    "if": (_if, 3),
}

CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|!=|&|\||[-+*/^(),<>]))"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(src):
    out, pos = [], 0
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {src[pos:pos + 1].strip() or src[pos]!r}", 1, pos + 1)
        kind = m.lastgroup
        out.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(Token("end", "", len(src)))
    return out


# AST nodes are tuples: ("num", v) | ("var", name) | ("neg", a) | ("bin", op, a, b) | ("call", name, args)

_BINARY = {
    "|": (1, "left"),
    "&": (2, "left"),
    "<": (3, "left"), ">": (3, "left"), "<=": (3, "left"), ">=": (3, "left"), "==": (3, "left"), "!=": (3, "left"),
    "+": (4, "left"), "-": (4, "left"),
    "*": (5, "left"), "/": (5, "left"),
    "^": (7, "right"),
}
_UNARY_BP = 6


class _Parser:
    def __init__(self, src, names):
        self.src = src
        self.toks = tokenize(src)
        self.i = 0
        self.names = names

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, 1, tok.pos + 1)

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}", t)
        return t

    def parse(self):
        if self.peek().kind == "end":
            raise self.error("empty expression")
        node = self.expr(0)
        if self.peek().kind != "end":
            raise self.error(f"unexpected token {self.peek().text!r}")
        return node

    def expr(self, min_bp):
        lhs = self.prefix()
        while True:
            t = self.peek()
            if t.kind != "op" or t.text not in _BINARY:
                break
            bp, assoc = _BINARY[t.text]
            if bp < min_bp:
                break
            self.next()
            rhs = self.expr(bp if assoc == "right" else bp + 1)
            lhs = ("bin", t.text, lhs, rhs)
        return lhs

    def prefix(self):
        t = self.next()
        if t.kind == "num":
            return ("num", float(t.text))
        if t.kind == "name":
            if self.peek().text == "(":
                if t.text not in FUNCTIONS:
                    raise self.error(f"unknown function {t.text!r}", t)
                self.next()
                args = []
                if self.peek().text != ")":
                    args.append(self.expr(0))
                    while self.peek().text == ",":
                        self.next()
                        args.append(self.expr(0))
                self.expect(")")
                arity = FUNCTIONS[t.text][1]
                if len(args) != arity:
                    raise self.error(f"{t.text} takes {arity} argument(s), got {len(args)}", t)
                return ("call", t.text, tuple(args))
            if t.text in self.names:
                return ("var", t.text)
            raise self.error(f"unknown identifier {t.text!r}", t)
        if t.text == "(":
            node = self.expr(0)
            self.expect(")")
            return node
        if t.text in ("-", "+"):
            operand = self.expr(_UNARY_BP)
            return ("neg", operand) if t.text == "-" else operand
        raise self.error(f"unexpected token {t.text or 'end of input'!r}", t)


_OPS = {
    "+": np.add, "-": np.subtract, "*": np.multiply,
    "<": lambda a, b: np.less(a, b).astype(float), ">": lambda a, b: np.greater(a, b).astype(float),
    "<=": lambda a, b: np.less_equal(a, b).astype(float), ">=": lambda a, b: np.greater_equal(a, b).astype(float),
    "==": lambda a, b: np.equal(a, b).astype(float), "!=": lambda a, b: np.not_equal(a, b).astype(float),
    "&": lambda a, b: np.logical_and(a != 0, b != 0).astype(float),
    "|": lambda a, b: np.logical_or(a != 0, b != 0).astype(float),
}


def _div(a, b):
    if np.any(np.asarray(b) == 0):
        raise EvaluationError("division by zero")
    return np.divide(a, b)


def _pow(a, b):
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any((a_arr < 0) & (b_arr != np.round(b_arr))):
        raise EvaluationError("fractional power of a negative number")
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise EvaluationError("zero raised to a negative power")
    return np.power(a_arr, b_arr)


def _compile(node):
    kind = node[0]
    if kind == "num":
        v = node[1]
        return lambda env: v
    if kind == "var":
        name = node[1]
        return lambda env: env[name]
    if kind == "neg":
        f = _compile(node[1])
        return lambda env: -f(env)
    if kind == "bin":
        op = node[1]
        fa, fb = _compile(node[2]), _compile(node[3])
        fn = {"/": _div, "^": _pow}.get(op) or _OPS[op]
        return lambda env: fn(fa(env), fb(env))
    if kind == "call":
        fn = FUNCTIONS[node[1]][0]
        args = [_compile(a) for a in node[2]]
        return lambda env: fn(*(a(env) for a in args))
    raise AssertionError(kind)


def _render(node):
    kind = node[0]
    if kind == "num":
        return repr(node[1])
    if kind == "var":
        return node[1]
    if kind == "neg":
        return f"(-{_render(node[1])})"
    if kind == "bin":
        return f"({_render(node[2])} {node[1]} {_render(node[3])})"
    return f"{node[1]}({', '.join(_render(a) for a in node[2])})"


class Expression:
    """A compiled expression.

    Parameters
    ----------
    src : str
        Expression text.
    constants : dict, optional
        Named constants (for example ``{"mu": 15.0}``); these shadow nothing in
        ``x, y, z, t`` and are fixed at compile time.
    """

    def __init__(self, src, constants=None):
        self.src = src
        consts = dict(CONSTANTS)
        consts.update(constants or {})
        clash = set(consts) & set(COORDS)
        if clash:
            raise ParseError(f"constant names clash with coordinates: {sorted(clash)}")
        self.constants = {k: float(v) for k, v in consts.items()}
        self.ast = _Parser(src, set(COORDS) | set(self.constants)).parse()
        self._fn = _compile(self.ast)

    def __call__(self, x=0.0, y=0.0, z=0.0, t=0.0):
        env = dict(self.constants)
        env.update(x=x, y=y, z=z, t=t)
        try:
            with np.errstate(all="ignore"):
                out = self._fn(env)
        except FloatingPointError as exc:
            raise EvaluationError(str(exc)) from None
        shape = np.broadcast(np.asarray(x), np.asarray(y), np.asarray(z), np.asarray(t)).shape
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        return float(out) if out.ndim == 0 else np.array(out)

    def at_points(self, pts, t=0.0):
        """Evaluate at points ``(n, d)`` with ``d <= 3``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cols = [pts[:, i] if i < pts.shape[1] else np.zeros(len(pts)) for i in range(3)]
        return self(cols[0], cols[1], cols[2], t)

    def as_field(self):
        """Adapter with the ``f(points, t)`` signature used by kernels and constraints."""
        return lambda pts, t=0.0: self.at_points(pts, t)

    def canonical(self):
        return _render(self.ast)

    def __repr__(self):
        return f"Expression({self.src!r})"


def parse_expression(src, constants=None):
    return Expression(src, constants)


def eval_expression(expr, x=0.0, y=0.0, z=0.0, t=0.0):
    if isinstance(expr, str):
        expr = Expression(expr)
    return expr(x, y, z, t)
