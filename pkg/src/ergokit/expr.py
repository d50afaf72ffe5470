"""A small, safe expression language for weights, costs and test functions.

Grammar: numbers, the variables ``x``, ``x1``, ``x2`` (``z``, ``z1``, ...
are accepted as aliases), ``+ - * / ^``, and the functions ``tanh``,
``exp`` and ``abs``. Expressions are parsed with :mod:`ast` against a
whitelist, turned into :mod:`sympy` and differentiated symbolically.

An expression ``e`` in the bare variable ``x`` on an ``l``-dimensional
state means ``sum_i e(x_i) - (l - 1) e(0)``, so ``"1 + x^2"`` is
``1 + |x|^2``.
"""

from __future__ import annotations

import ast
import re

import numpy as np
import sympy as sp

from .semigroup import TestFunction

MAX_DIM = 4
_FUNCS = {"tanh": sp.tanh, "exp": sp.exp, "abs": sp.Abs}
_BINOPS = {ast.Add: sp.Add, ast.Sub: lambda a, b: a - b, ast.Mult: sp.Mul,
           ast.Div: lambda a, b: a / b, ast.Pow: sp.Pow}
_VAR = re.compile(r"^[xz]([1-9]?)$")

# growth classes, ordered
GROWTH_RANK = {"bounded": 0, "linear": 1, "quadratic": 2, "polynomial": 3, "exponential": 4}


class ExpressionError(ValueError):
    pass


def _to_sympy(node, symbols: dict) -> sp.Expr:
    if isinstance(node, ast.Expression):
        return _to_sympy(node.body, symbols)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return sp.nsimplify(node.value) if isinstance(node.value, int) else sp.Float(node.value)
    if isinstance(node, ast.Name):
        m = _VAR.match(node.id)
        if not m:
            raise ExpressionError(f"unknown name {node.id!r}")
        idx = int(m.group(1)) if m.group(1) else 0
        if idx > MAX_DIM:
            raise ExpressionError(f"coordinate {node.id!r} out of range")
        return symbols.setdefault(idx, sp.Symbol(f"x{idx}", real=True))
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_to_sympy(node.left, symbols), _to_sympy(node.right, symbols))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _to_sympy(node.operand, symbols)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        return _FUNCS[node.func.id](_to_sympy(node.args[0], symbols))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse(text: str) -> tuple[sp.Expr, dict]:
    """Parse ``text``; returns the sympy expression and ``{index: symbol}``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from exc
    symbols: dict = {}
    expr = _to_sympy(tree, symbols)
    if 0 in symbols and len(symbols) > 1:
        raise ExpressionError("mix of bare x and indexed coordinates")
    return expr, symbols


def growth_class(expr: sp.Expr, symbols: dict) -> str:
    """Coarse growth class of ``expr`` at infinity."""
    if not symbols:
        return "bounded"
    if expr.has(sp.exp):
        return "exponential"
    if any(isinstance(a, sp.Pow) and not a.exp.is_number for a in sp.preorder_traversal(expr)):
        return "exponential"
    stripped = expr.replace(sp.tanh, lambda a: sp.Integer(1)).replace(sp.Abs, lambda a: a)
    try:
        deg = max(sp.Poly(stripped, *symbols.values()).total_degree(), 0)
    except sp.PolynomialError:
        return "polynomial"
    if deg == 0:
        return "bounded"
    return {1: "linear", 2: "quadratic"}.get(deg, "polynomial")


def compile_function(text: str, dim: int, name: str = "") -> TestFunction:
    """Compile ``text`` into a vectorised :class:`TestFunction` on ``R^dim``."""
    expr, symbols = parse(text)
    growth = growth_class(expr, symbols)
    name = name or text
    if 0 in symbols:
        s = symbols[0]
        f1 = sp.lambdify(s, expr, "numpy")
        g1 = sp.lambdify(s, sp.diff(expr, s), "numpy")
        offset = (dim - 1) * float(expr.subs(s, 0))

        def f(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(f1(x), x.shape).sum(-1) - offset

        def grad(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(g1(x), x.shape).astype(float)

        return TestFunction(f, grad, growth, name)

    if symbols and max(symbols) > dim:
        raise ExpressionError(f"{text!r} uses x{max(symbols)} but the state has dimension {dim}")
    syms = [symbols.get(i + 1, sp.Symbol(f"x{i + 1}", real=True)) for i in range(dim)]
    fn = sp.lambdify(syms, expr, "numpy")
    grads = [sp.lambdify(syms, sp.diff(expr, s), "numpy") for s in syms]

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(fn(*np.moveaxis(x, -1, 0)), x.shape[:-1]).astype(float)

    def grad(x):
        x = np.asarray(x, dtype=float)
        cols = [np.broadcast_to(g(*np.moveaxis(x, -1, 0)), x.shape[:-1]) for g in grads]
        return np.stack(cols, axis=-1).astype(float)

    return TestFunction(f, grad, growth, name)
