"""Precision plumbing around mpmath: exact parameter parsing and decimal I/O."""
from __future__ import annotations

import ast
import math
import operator
from fractions import Fraction

import mpmath as mp

from .errors import PrecisionUnavailable

MIN_PREC = 53
MAX_PREC = 4096
DEFAULT_PREC = 64
# extra bits carried internally so that results rounded to `prec` are clean
GUARD = 24


def check_prec(prec: int) -> int:
    prec = int(prec)
    if prec < MIN_PREC or prec > MAX_PREC:
        raise PrecisionUnavailable(f"precision {prec} outside [{MIN_PREC}, {MAX_PREC}]")
    return prec


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": mp.sqrt, "cos": mp.cos, "sin": mp.sin, "tan": mp.tan,
          "exp": mp.exp, "log": mp.log}
_CONSTS = {"pi": lambda: +mp.pi, "e": lambda: +mp.e}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        # go through repr so that "0.1" means the decimal 1/10, not the double
        return mp.mpf(repr(node.value)) if isinstance(node.value, float) else mp.mpf(node.value)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Name) and node.id in _CONSTS:
        return _CONSTS[node.id]()
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1):
        return _FUNCS[node.func.id](_eval_node(node.args[0]))
    raise ValueError(f"unsupported expression element: {ast.dump(node)}")


def real(v):
    """Exact-ish real at the current mpmath precision.

    Accepts ints, Fractions, decimal strings and small arithmetic expressions
    such as ``"3*sqrt(3)"``. Floats are taken at their shortest repr.
    """
    if isinstance(v, mp.mpf):
        return +v
    if isinstance(v, bool):
        raise TypeError("bool is not a real parameter")
    if isinstance(v, int):
        return mp.mpf(v)
    if isinstance(v, Fraction):
        return mp.mpf(v.numerator) / v.denominator
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError("non-finite parameter")
        return mp.mpf(repr(v))
    if isinstance(v, str):
        return _eval_node(ast.parse(v.strip(), mode="eval"))
    raise TypeError(f"cannot interpret {v!r} as a real")


def param_key(v):
    """Hashable, JSON-friendly form of a parameter."""
    if isinstance(v, (int, str)):
        return v
    if isinstance(v, float):
        return v
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, mp.mpf):
        return mp.nstr(v, digits_for(mp.mp.prec), strip_zeros=False)
    raise TypeError(f"unsupported parameter {v!r}")


def digits_for(prec: int) -> int:
    return int(math.ceil(prec * math.log10(2))) + 1


def to_decimal(x, prec: int) -> str:
    """Decimal string that rounds back to x at `prec` bits; trailing zeros trimmed."""
    with mp.workprec(prec):
        x = +mp.mpf(x)
        s = mp.nstr(x, digits_for(prec), strip_zeros=True, min_fixed=-6, max_fixed=20)
    if "e" not in s and s.endswith(".0"):
        s = s[:-2]
    return s


def from_decimal(s: str, prec: int):
    with mp.workprec(prec):
        return mp.mpf(s)
