"""Exact integer expressions used by rule files and mapping files.

The syntax is ordinary arithmetic over integers and named variables:
``112k^2+116k+13``, ``(98*4^k-11)/3``, ``2048*(4^k-1)/3``.  A number directly
followed by a variable or a parenthesis is an implicit product.  Division
must be exact; anything else raises :class:`NonIntegralError`.
"""
from __future__ import annotations

import ast
import re
from math import gcd
from typing import Callable, Mapping, Optional, Sequence

Env = Mapping[str, int]


class ExprError(ValueError):
    pass


class NonIntegralError(ArithmeticError):
    """An exact division left a remainder."""


_IMPLICIT = re.compile(r"(?<=[0-9)])(?=[A-Za-z(])")


def _exact_div(a: int, b: int) -> int:
    q, r = divmod(a, b)
    if r:
        raise NonIntegralError(f"{a} is not divisible by {b}")
    return q


def _pow(a: int, b: int) -> int:
    if b < 0:
        raise NonIntegralError(f"negative exponent {b}")
    return a**b


_BINOPS: dict[type, Callable[[int, int], int]] = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: _exact_div,
    ast.Pow: _pow,
}


def _compile(node: ast.AST) -> Callable[[Env], int]:
    if isinstance(node, ast.Constant) and type(node.value) is int:
        v = node.value
        return lambda env: v
    if isinstance(node, ast.Name):
        name = node.id

        def lookup(env: Env) -> int:
            try:
                return env[name]
            except KeyError:
                raise ExprError(f"unbound variable {name!r}") from None

        return lookup
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        lhs, rhs = _compile(node.left), _compile(node.right)
        return lambda env: op(lhs(env), rhs(env))
    raise ExprError(f"unsupported syntax: {ast.dump(node)}")


def _linear(node: ast.AST) -> tuple[int, dict[str, int]]:
    """Reduce to ``const + sum(coef * var)`` or raise ExprError."""
    if isinstance(node, ast.Constant) and type(node.value) is int:
        return node.value, {}
    if isinstance(node, ast.Name):
        return 0, {node.id: 1}
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        c, v = _linear(node.operand)
        if isinstance(node.op, ast.USub):
            return -c, {k: -x for k, x in v.items()}
        return c, v
    if isinstance(node, ast.BinOp):
        lc, lv = _linear(node.left)
        rc, rv = _linear(node.right)
        if isinstance(node.op, (ast.Add, ast.Sub)):
            sign = 1 if isinstance(node.op, ast.Add) else -1
            out = dict(lv)
            for k, x in rv.items():
                out[k] = out.get(k, 0) + sign * x
            return lc + sign * rc, {k: x for k, x in out.items() if x}
        if isinstance(node.op, ast.Mult):
            if lv and rv:
                raise ExprError("product of variables is not linear")
            if not lv:
                return lc * rc, {k: lc * x for k, x in rv.items()}
            return lc * rc, {k: rc * x for k, x in lv.items()}
    raise ExprError("expression is not linear")


class Expr:
    """A parsed integer expression."""

    __slots__ = ("text", "_tree", "_fn", "variables")

    def __init__(self, text: str):
        text = text.strip()
        if not text:
            raise ExprError("empty expression")
        src = _IMPLICIT.sub("*", text.replace(" ", "")).replace("^", "**")
        try:
            tree = ast.parse(src, mode="eval").body
        except SyntaxError as exc:
            raise ExprError(f"cannot parse {text!r}") from exc
        self.text = text
        self._tree = tree
        self._fn = _compile(tree)
        self.variables = frozenset(n.id for n in ast.walk(tree) if isinstance(n, ast.Name))

    def __call__(self, env: Optional[Env] = None) -> int:
        return self._fn(env or {})

    def linear(self) -> tuple[int, dict[str, int]]:
        """Return ``(const, {var: coef})``; raises if not linear."""
        return _linear(self._tree)

    @property
    def exponential(self) -> bool:
        """Whether a variable appears in some exponent."""
        return any(
            isinstance(n, ast.BinOp)
            and isinstance(n.op, ast.Pow)
            and any(isinstance(x, ast.Name) for x in ast.walk(n.right))
            for n in ast.walk(self._tree)
        )

    def __repr__(self) -> str:
        return f"Expr({self.text!r})"

    def __str__(self) -> str:
        return self.text

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Expr) and ast.dump(self._tree) == ast.dump(other._tree)

    def __hash__(self) -> int:
        return hash(ast.dump(self._tree))


class Affine:
    """``offset + coef * var`` with ``coef >= 0``, used to match arguments."""

    __slots__ = ("offset", "coef", "var", "expr")

    def __init__(self, expr: Expr):
        const, coefs = expr.linear()
        if len(coefs) > 1:
            raise ExprError(f"{expr} uses more than one variable")
        self.expr = expr
        self.offset = const
        if coefs:
            (self.var, self.coef), = coefs.items()
            if self.coef <= 0:
                raise ExprError(f"{expr}: coefficient must be positive")
        else:
            self.var, self.coef = None, 0

    def solve(self, value: int) -> Optional[int]:
        """Variable value (>= 0) producing ``value``, or None."""
        if self.var is None:
            return 0 if value == self.offset else None
        q, r = divmod(value - self.offset, self.coef)
        if r or q < 0:
            return None
        return q

    def intersects(self, other: "Affine") -> bool:
        """Whether the two value sets (variables ranging over n >= 0) meet."""
        if self.var is None and other.var is None:
            return self.offset == other.offset
        if self.var is None:
            return other.solve(self.offset) is not None
        if other.var is None:
            return self.solve(other.offset) is not None
        return (other.offset - self.offset) % gcd(self.coef, other.coef) == 0

    def __repr__(self) -> str:
        return f"Affine({self.expr.text!r})"


def bind_affine(params: Sequence[Affine], args: Sequence[int]) -> Optional[dict[str, int]]:
    """Consistent variable assignment matching every argument, or None."""
    if len(params) != len(args):
        return None
    env: dict[str, int] = {}
    for param, value in zip(params, args):
        v = param.solve(value)
        if v is None:
            return None
        if param.var is not None and env.setdefault(param.var, v) != v:
            return None
    return env
