"""Arithmetic expressions over ``t`` and ``b`` for custom barriers and terminal values.

Grammar: numbers, the variables ``t`` and ``b``, the operators
``+ - * / **`` (``^`` is accepted as a synonym for ``**``), parentheses and
the functions ``exp log abs max min pow pos neg`` where ``pos(x) = max(x, 0)``
and ``neg(x) = max(-x, 0)``. Expressions are evaluated element-wise on
numpy arrays.
"""

from __future__ import annotations

import ast
import operator

import numpy as np

from .exceptions import ConfigurationError

__all__ = ["compile_expression", "FUNCTIONS"]

FUNCTIONS = {
    "exp": (np.exp, 1),
    "log": (np.log, 1),
    "abs": (np.abs, 1),
    "max": (np.maximum, 2),
    "min": (np.minimum, 2),
    "pow": (np.power, 2),
    "pos": (lambda x: np.maximum(x, 0.0), 1),
    "neg": (lambda x: np.maximum(-x, 0.0), 1),
}
VARIABLES = ("t", "b")

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: np.power,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _build(node, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        if node.id not in VARIABLES:
            raise ConfigurationError(f"unknown variable {node.id!r} in {text!r}")
        name = node.id
        return lambda env: env[name]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _build(node.left, text), _build(node.right, text)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        op = _UNARY[type(node.op)]
        arg = _build(node.operand, text)
        return lambda env: op(arg(env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        if node.func.id not in FUNCTIONS:
            raise ConfigurationError(f"unknown function {node.func.id!r} in {text!r}")
        fn, arity = FUNCTIONS[node.func.id]
        if len(node.args) != arity:
            raise ConfigurationError(
                f"{node.func.id} takes {arity} argument(s) in {text!r}"
            )
        args = [_build(a, text) for a in node.args]
        return lambda env: fn(*(a(env) for a in args))
    raise ConfigurationError(f"unsupported syntax {ast.dump(node)!r} in {text!r}")


def compile_expression(text):
    """Compile ``text`` into a callable ``f(t=..., b=...)`` returning an array."""
    try:
        # '^' is rewritten before parsing so it binds like '**', not like XOR
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse expression {text!r}: {exc.msg}") from None
    body = _build(tree.body, text)

    def evaluate(t=0.0, b=0.0):
        b = np.asarray(b, dtype=float)
        with np.errstate(all="ignore"):
            out = body({"t": t, "b": b})
        return np.broadcast_to(np.asarray(out, dtype=float), b.shape).copy()

    evaluate.source = text
    return evaluate
