"""Small arithmetic expression language for coefficient fields.

Grammar: numbers, ``+ - * / ^`` (``**`` also accepted), parentheses,
functions ``sin cos cosh sinh exp``, constants ``pi e``, variables
``t x l``. Expressions compile to numpy-vectorised callables ``f(t, x, l)``.
"""

from __future__ import annotations

import ast
import math

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "cosh": np.cosh,
    "sinh": np.sinh,
    "exp": np.exp,
}
CONSTANTS = {"pi": math.pi, "e": math.e}
VARIABLES = ("t", "x", "l")

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    pass


class Expression:
    """Compiled expression; calling it evaluates on broadcast (t, x, l)."""

    def __init__(self, source: str):
        if not isinstance(source, str):
            raise ExpressionError(f"expression must be a string, got {type(source).__name__}")
        self.source = source
        try:
            tree = ast.parse(source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        self._check(tree.body)
        self._tree = tree.body
        self.variables = sorted(
            {n.id for n in ast.walk(tree) if isinstance(n, ast.Name) and n.id in VARIABLES}
        )

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"unsupported literal {node.value!r} in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id not in VARIABLES and node.id not in CONSTANTS:
                raise ExpressionError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"unsupported operator in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.UAdd, ast.USub)):
                raise ExpressionError(f"unsupported unary operator in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionError(f"unknown function in {self.source!r}")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"functions take exactly one argument: {self.source!r}")
            self._check(node.args[0])
        else:
            raise ExpressionError(f"unsupported syntax {type(node).__name__} in {self.source!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else CONSTANTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        return FUNCTIONS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, t, x, l):
        t, x, l = np.broadcast_arrays(
            np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(l, dtype=float)
        )
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, {"t": t, "x": x, "l": l})
        return np.broadcast_to(np.asarray(out, dtype=float), t.shape)

    def __repr__(self):
        return f"Expression({self.source!r})"


def compile_expression(source: str | float | int) -> Expression:
    """Accept a string or a bare number (which becomes a constant expression)."""
    if isinstance(source, (int, float)) and not isinstance(source, bool):
        return Expression(repr(float(source)))
    return Expression(source)
