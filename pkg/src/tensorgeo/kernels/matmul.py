"""Matrix multiplication kernels.

The direct and tiled kernels accumulate every output element over the
shared axis in the same ascending order, so any tiling reproduces the
direct result bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError, UnsupportedError
from ..tensor import as_array
from .variants import DIRECT, AlgorithmVariant, MulCounter


def matmul_shape(a_shape, b_shape) -> tuple[int, int]:
    if len(a_shape) != 2 or len(b_shape) != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a_shape} and {b_shape}")
    if a_shape[1] != b_shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a_shape} x {b_shape}")
    return (a_shape[0], b_shape[1])


def _direct(a: np.ndarray, b: np.ndarray, counter: MulCounter | None) -> np.ndarray:
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float32)
    for k in range(a.shape[1]):
        out += np.multiply.outer(a[:, k], b[k])
    if counter is not None:
        counter.add(a.shape[0] * a.shape[1] * b.shape[1])
    return out


def _tiled(a, b, t_e, t_b, counter):
    rows, e = a.shape
    n = b.shape[1]
    out = np.zeros((rows, n), dtype=np.float32)
    for j0 in range(0, n, t_b):
        j1 = min(j0 + t_b, n)
        acc = out[:, j0:j1]
        for k0 in range(0, e, t_e):
            # remainder tiles are clamped at the matrix edge
            for k in range(k0, min(k0 + t_e, e)):
                acc += np.multiply.outer(a[:, k], b[k, j0:j1])
    if counter is not None:
        counter.add(rows * e * n)
    return out


def _split(x: np.ndarray, rows: int, cols: int):
    """Zero-pad a batch of matrices to (2*rows, 2*cols) and return its quadrants."""
    padded = np.zeros((x.shape[0], 2 * rows, 2 * cols))
    padded[:, :x.shape[1], :x.shape[2]] = x
    return (padded[:, :rows, :cols], padded[:, :rows, cols:],
            padded[:, rows:, :cols], padded[:, rows:, cols:])


def _strassen(a, b, cutoff, counter):
    """Strassen's recursion unrolled level by level.

    At each level the seven sub-products of every pending multiplication are
    stacked on a batch axis, so a level costs a handful of array operations
    instead of one Python call per sub-product.  Sums run in float64.
    """
    xs, ys = a[None].astype(np.float64), b[None].astype(np.float64)
    m, e, n = a.shape[0], a.shape[1], b.shape[1]
    levels = []
    while min(m, e, n) > cutoff:
        hm, he, hn = math.ceil(m / 2), math.ceil(e / 2), math.ceil(n / 2)
        a11, a12, a21, a22 = _split(xs, hm, he)
        b11, b12, b21, b22 = _split(ys, he, hn)
        xs = np.concatenate([a11 + a22, a21 + a22, a11, a22, a11 + a12, a21 - a11, a12 - a22])
        ys = np.concatenate([b11 + b22, b11, b12 - b22, b21 - b11, b22, b11 + b12, b21 + b22])
        levels.append((m, n, hm, hn))
        m, e, n = hm, he, hn
    if counter is not None:
        counter.add(xs.shape[0] * m * e * n)
    out = np.matmul(xs, ys)
    for m, n, hm, hn in reversed(levels):
        m1, m2, m3, m4, m5, m6, m7 = out.reshape(7, -1, hm, hn)
        full = np.empty((m1.shape[0], 2 * hm, 2 * hn))
        full[:, :hm, :hn] = m1 + m4 - m5 + m7
        full[:, :hm, hn:] = m3 + m5
        full[:, hm:, :hn] = m2 + m4
        full[:, hm:, hn:] = m1 - m2 + m3 + m6
        out = full[:, :m, :n]
    return out[0].astype(np.float32)


def matmul(a, b, variant: AlgorithmVariant = DIRECT, counter: MulCounter | None = None) -> np.ndarray:
    """``a @ b`` using the requested algorithm.

    ``counter``, when given, accumulates the scalar multiplications done by
    the base-case kernels.
    """
    a, b = as_array(a), as_array(b)
    matmul_shape(a.shape, b.shape)
    if variant.kind == "direct":
        return _direct(a, b, counter)
    if variant.kind == "tiled":
        return _tiled(a, b, variant.t_e, variant.t_b, counter)
    if variant.kind == "strassen":
        return np.ascontiguousarray(_strassen(a, b, variant.cutoff, counter))
    raise UnsupportedError(f"matmul has no {variant} variant")
