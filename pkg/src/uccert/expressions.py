"""Closed-form expression trees for user-supplied scalar fields.

The driver accepts surface definitions like ``norm(x2, x3) - 1 - x1`` in its
config files.  Expressions are parsed into a small AST supporting +, -, *, /,
^ (numeric exponent), sqrt and norm over the coordinate variables x1..xn, and
evaluate with exact analytic gradients and Hessians, which keeps every
downstream derivative supplier twice differentiable.
"""

from __future__ import annotations

import re
from typing import List, Tuple

import numpy as np

from .errors import ContractViolation
from .fields import ScalarField


class Expr:
    def ev(self, x) -> float:
        raise NotImplementedError

    def gr(self, x) -> np.ndarray:
        raise NotImplementedError

    def he(self, x) -> np.ndarray:
        raise NotImplementedError


class Const(Expr):
    def __init__(self, v: float, dim: int):
        self.v = float(v)
        self.dim = dim

    def ev(self, x):
        return self.v

    def gr(self, x):
        return np.zeros(self.dim)

    def he(self, x):
        return np.zeros((self.dim, self.dim))


class Var(Expr):
    def __init__(self, idx: int, dim: int):
        if not 0 <= idx < dim:
            raise ContractViolation(f"variable x{idx + 1} out of range for dim {dim}")
        self.idx = idx
        self.dim = dim

    def ev(self, x):
        return float(x[self.idx])

    def gr(self, x):
        g = np.zeros(self.dim)
        g[self.idx] = 1.0
        return g

    def he(self, x):
        return np.zeros((self.dim, self.dim))


class Add(Expr):
    def __init__(self, a: Expr, b: Expr):
        self.a, self.b = a, b

    def ev(self, x):
        return self.a.ev(x) + self.b.ev(x)

    def gr(self, x):
        return self.a.gr(x) + self.b.gr(x)

    def he(self, x):
        return self.a.he(x) + self.b.he(x)


class Sub(Expr):
    def __init__(self, a: Expr, b: Expr):
        self.a, self.b = a, b

    def ev(self, x):
        return self.a.ev(x) - self.b.ev(x)

    def gr(self, x):
        return self.a.gr(x) - self.b.gr(x)

    def he(self, x):
        return self.a.he(x) - self.b.he(x)


class Mul(Expr):
    def __init__(self, a: Expr, b: Expr):
        self.a, self.b = a, b

    def ev(self, x):
        return self.a.ev(x) * self.b.ev(x)

    def gr(self, x):
        return self.a.ev(x) * self.b.gr(x) + self.b.ev(x) * self.a.gr(x)

    def he(self, x):
        ga, gb = self.a.gr(x), self.b.gr(x)
        return (self.a.ev(x) * self.b.he(x) + self.b.ev(x) * self.a.he(x)
                + np.outer(ga, gb) + np.outer(gb, ga))


class Div(Expr):
    def __init__(self, a: Expr, b: Expr):
        self.a, self.b = a, b

    def ev(self, x):
        return self.a.ev(x) / self.b.ev(x)

    def gr(self, x):
        av, bv = self.a.ev(x), self.b.ev(x)
        return (self.a.gr(x) * bv - av * self.b.gr(x)) / (bv * bv)

    def he(self, x):
        av, bv = self.a.ev(x), self.b.ev(x)
        ga, gb = self.a.gr(x), self.b.gr(x)
        return (self.a.he(x) / bv
                - (np.outer(ga, gb) + np.outer(gb, ga)) / (bv * bv)
                - av * self.b.he(x) / (bv * bv)
                + 2.0 * av * np.outer(gb, gb) / (bv ** 3))


class Pow(Expr):
    def __init__(self, a: Expr, p: float):
        self.a = a
        self.p = float(p)

    def ev(self, x):
        return self.a.ev(x) ** self.p

    def gr(self, x):
        av = self.a.ev(x)
        return self.p * av ** (self.p - 1.0) * self.a.gr(x)

    def he(self, x):
        av = self.a.ev(x)
        ga = self.a.gr(x)
        return (self.p * (self.p - 1.0) * av ** (self.p - 2.0) * np.outer(ga, ga)
                + self.p * av ** (self.p - 1.0) * self.a.he(x))


def norm_expr(args: List[Expr], dim: int) -> Expr:
    """sqrt of the sum of squares, built from the core nodes."""
    if not args:
        raise ContractViolation("norm() needs at least one argument")
    total: Expr = Mul(args[0], args[0])
    for a in args[1:]:
        total = Add(total, Mul(a, a))
    return Pow(total, 0.5)


_TOKEN_RE = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                       r"|([A-Za-z_][A-Za-z_0-9]*)|(\*\*)|([()+\-*/^,]))")


def _tokenize(text: str) -> List[Tuple[str, str]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ContractViolation(f"cannot tokenize expression at: {text[pos:pos + 20]!r}")
        num, name, dstar, op = m.groups()
        if num is not None:
            out.append(("num", num))
        elif name is not None:
            out.append(("name", name))
        elif dstar is not None:
            out.append(("op", "^"))
        else:
            out.append(("op", op))
        pos = m.end()
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, tokens: List[Tuple[str, str]], dim: int):
        self.toks = tokens
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect_op(self, op: str):
        kind, val = self.next()
        if kind != "op" or val != op:
            raise ContractViolation(f"expected {op!r}, got {val!r}")

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise ContractViolation(f"trailing input at {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.next()
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.next()
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Expr:
        sign = 1.0
        while self.peek() in (("op", "-"), ("op", "+")):
            if self.next()[1] == "-":
                sign = -sign
        node = self.power()
        if sign < 0:
            node = Sub(Const(0.0, self.dim), node)
        return node

    def power(self) -> Expr:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.next()
            expo = self._numeric_exponent()
            return Pow(base, expo)
        return base

    def _numeric_exponent(self) -> float:
        sign = 1.0
        while self.peek() in (("op", "-"), ("op", "+")):
            if self.next()[1] == "-":
                sign = -sign
        kind, val = self.next()
        if kind != "num":
            raise ContractViolation("exponent must be a numeric literal")
        return sign * float(val)

    def atom(self) -> Expr:
        kind, val = self.next()
        if kind == "num":
            return Const(float(val), self.dim)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "name":
            if self.peek() == ("op", "("):
                self.next()
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.next()
                    args.append(self.expr())
                self.expect_op(")")
                if val == "sqrt":
                    if len(args) != 1:
                        raise ContractViolation("sqrt() takes one argument")
                    return Pow(args[0], 0.5)
                if val == "norm":
                    return norm_expr(args, self.dim)
                raise ContractViolation(f"unknown function {val!r}")
            m = re.fullmatch(r"x(\d+)", val)
            if not m:
                raise ContractViolation(f"unknown symbol {val!r}; variables are x1..x{self.dim}")
            return Var(int(m.group(1)) - 1, self.dim)
        raise ContractViolation(f"unexpected token {val!r}")


def parse_expression(text: str, dim: int) -> Expr:
    return _Parser(_tokenize(text), dim).parse()


def expression_field(text: str, dim: int, name: str = "") -> ScalarField:
    """Parse a closed-form expression into an analytic scalar field."""
    node = parse_expression(text, dim)
    sf = ScalarField(node.ev, node.gr, node.he, name=name or text)
    sf.analytic = True
    return sf
