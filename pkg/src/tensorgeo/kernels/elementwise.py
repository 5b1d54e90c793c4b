from __future__ import annotations

import numpy as np

from ..errors import AxisError, ShapeError, UnsupportedError
from ..tensor import as_array


def _sigmoid(x):
    return np.float32(1) / (np.float32(1) + np.exp(-x))


def _relu(x):
    return np.maximum(x, np.float32(0))


UNARY = {
    "neg": np.negative,
    "square": np.square,
    "sqrt": np.sqrt,
    "exp": np.exp,
    "sigmoid": _sigmoid,
    "tanh": np.tanh,
    "relu": _relu,
}

BINARY = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
    "max": np.maximum,
}

ELEMENTWISE_KINDS = tuple(UNARY) + tuple(BINARY)


def elementwise(op: str, *inputs) -> np.ndarray:
    """Apply a unary or binary elementwise operator.

    Binary operands must have identical shapes; nothing is broadcast here.
    Division by zero follows IEEE rules.
    """
    args = [as_array(x) for x in inputs]
    if op in UNARY:
        if len(args) != 1:
            raise ShapeError(f"{op} takes one input, got {len(args)}")
        fn = UNARY[op]
    elif op in BINARY:
        if len(args) != 2:
            raise ShapeError(f"{op} takes two inputs, got {len(args)}")
        if args[0].shape != args[1].shape:
            raise ShapeError(f"{op}: shapes {args[0].shape} and {args[1].shape} differ")
        fn = BINARY[op]
    else:
        raise UnsupportedError(f"unknown elementwise operator {op!r}")
    with np.errstate(all="ignore"):
        return np.asarray(fn(*args), dtype=np.float32)


def reduce_sum(t, axis: int) -> np.ndarray:
    x = as_array(t)
    if not 0 <= axis < x.ndim:
        raise AxisError(f"axis {axis} out of range for rank {x.ndim}")
    return np.asarray(x.sum(axis=axis, dtype=np.float32), dtype=np.float32)
