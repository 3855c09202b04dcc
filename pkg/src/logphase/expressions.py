"""Minimal arithmetic expressions over x and y for config files.

Grammar (no general scripting, by design):

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := unary ("^" factor)?          # right associative
    unary   := "-" unary | primary
    primary := NUMBER | "x" | "y" | "e" | "pi"
             | ("min" | "max") "(" expr "," expr ")"
             | "(" expr ")"

Compiles to a closure evaluating on an (k, 2) array of points and
returning a (k,) array.
"""

import math
import re

import numpy as np

__all__ = ["compile_expression", "ExpressionError"]


class ExpressionError(ValueError):
    pass


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExpressionError(f"bad character at {text[pos:pos + 8]!r}")
        pos = m.end()
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None):
        tok = self.tokens[self.i]
        if kind and tok[0] != kind or value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value or kind}, found {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input at {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            op = self.take()[1]
            node = self._bin(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            op = self.take()[1]
            node = self._bin(op, node, self.factor())
        return node

    def factor(self):
        base = self.unary()
        if self.peek() == ("op", "^"):
            self.take()
            return self._bin("^", base, self.factor())
        return base

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda p: -inner(p)
        return self.primary()

    def primary(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return lambda p, v=val: np.full(p.shape[0], v)
        if kind == "name":
            self.take()
            if val == "x":
                return lambda p: p[:, 0]
            if val == "y":
                return lambda p: p[:, 1]
            if val == "e":
                return lambda p: np.full(p.shape[0], math.e)
            if val == "pi":
                return lambda p: np.full(p.shape[0], math.pi)
            if val in ("min", "max"):
                self.take("op", "(")
                a = self.expr()
                self.take("op", ",")
                b = self.expr()
                self.take("op", ")")
                fn = np.minimum if val == "min" else np.maximum
                return lambda p: fn(a(p), b(p))
            raise ExpressionError(f"unknown name {val!r}")
        if (kind, val) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        raise ExpressionError(f"unexpected token {val!r}")

    @staticmethod
    def _bin(op, a, b):
        if op == "+":
            return lambda p: a(p) + b(p)
        if op == "-":
            return lambda p: a(p) - b(p)
        if op == "*":
            return lambda p: a(p) * b(p)
        if op == "/":
            return lambda p: a(p) / b(p)
        return lambda p: a(p) ** b(p)


def compile_expression(text: str):
    """Compile an expression string to a callable (k, 2) -> (k,)."""
    fn = _Parser(_tokenize(str(text))).parse()

    def evaluate(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(fn(points), dtype=float)

    return evaluate
