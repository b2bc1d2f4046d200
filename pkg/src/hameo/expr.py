"""Small arithmetic grammar for Hamiltonian expressions.

The text is parsed with ``ast`` and only a whitelist of node types is
accepted; the tree is then rebuilt as a sympy expression, so nothing from
the input is ever evaluated by Python. Value and gradient are lambdified
in Cartesian variables.
"""
from __future__ import annotations

import ast

import numpy as np
import sympy as sp

from .errors import ConfigurationError

FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "sqrt": sp.sqrt}
CONSTANTS = {"pi": sp.pi}

DISC_VARS = ("t", "r", "theta", "x", "y")
SPHERE_VARS = ("t", "z", "phi", "x", "y")

_t, _x, _y, _z = sp.symbols("t x y z", real=True)


def _error(msg, node=None):
    if node is not None and hasattr(node, "col_offset"):
        msg = f"{msg} (column {node.col_offset + 1})"
    return ConfigurationError(msg)


def _build(node, names):
    if isinstance(node, ast.Expression):
        return _build(node.body, names)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise _error("only numeric literals are allowed", node)
        return sp.Float(node.value) if isinstance(node.value, float) else sp.Integer(node.value)
    if isinstance(node, ast.Name):
        if node.id in names:
            return names[node.id]
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        raise _error(f"unknown variable {node.id!r}", node)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _build(node.operand, names)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a, b = _build(node.left, names), _build(node.right, names)
        op = node.op
        if isinstance(op, ast.Add):
            return a + b
        if isinstance(op, ast.Sub):
            return a - b
        if isinstance(op, ast.Mult):
            return a * b
        if isinstance(op, ast.Div):
            return a / b
        if isinstance(op, ast.Pow):
            return a ** b
        raise _error("unsupported operator", node)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise _error("unsupported function", node)
        if len(node.args) != 1 or node.keywords:
            raise _error(f"{node.func.id} takes one argument", node)
        return FUNCTIONS[node.func.id](_build(node.args[0], names))
    raise _error(f"unsupported syntax {type(node).__name__}", node)


def parse(text: str, kind: str):
    """Return a sympy expression in the Cartesian symbols (t, x, y[, z])."""
    if not isinstance(text, str) or not text.strip():
        raise ConfigurationError("empty expression")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse expression {text!r}: {exc.msg} (column {exc.offset})") from None
    if kind == "disc":
        names = {"t": _t, "x": _x, "y": _y, "r": sp.sqrt(_x ** 2 + _y ** 2), "theta": sp.atan2(_y, _x)}
    else:
        names = {"t": _t, "x": _x, "y": _y, "z": _z, "phi": sp.atan2(_y, _x)}
    return _build(tree, names)


def compile_expression(text: str, kind: str):
    """(value, gradient, autonomous) callables acting on (t, p) arrays."""
    e = parse(text, kind)
    space = (_x, _y) if kind == "disc" else (_x, _y, _z)
    args = (_t,) + space
    f = sp.lambdify(args, e, "numpy")
    grads = [sp.lambdify(args, sp.diff(e, v), "numpy") for v in space]
    autonomous = _t not in e.free_symbols

    def value(t, p):
        p = np.asarray(p, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
        out = f(t, *np.moveaxis(p, -1, 0))
        return np.broadcast_to(np.asarray(out, dtype=float), p.shape[:-1]).copy()

    def gradient(t, p):
        p = np.asarray(p, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
        comps = [np.broadcast_to(np.asarray(g(t, *np.moveaxis(p, -1, 0)), dtype=float), p.shape[:-1]) for g in grads]
        return np.stack(comps, axis=-1)

    return value, gradient, autonomous
