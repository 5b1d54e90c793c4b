"""2-D convolution (cross-correlation) kernels: direct and Winograd F(m, 3)."""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError, UnsupportedError
from ..tensor import as_array
from .variants import DIRECT, AlgorithmVariant, MulCounter

# interpolation points for the Cook-Toom construction; infinity is implicit
WINOGRAD_POINTS = {
    2: (0, 1, -1),
    6: (0, 1, -1, 2, -2, Fraction(1, 2), Fraction(-1, 2)),
}


def conv2d_shape(x_shape, w_shape, stride: int = 1, pad: int = 0) -> tuple[int, int, int, int]:
    if len(x_shape) != 4 or len(w_shape) != 4:
        raise ShapeError(f"conv2d needs rank-4 input and weight, got {x_shape}, {w_shape}")
    n, c, h, w = x_shape
    o, wc, kh, kw = w_shape
    if wc != c:
        raise ShapeError(f"weight expects {wc} channels, input has {c}")
    if stride < 1 or pad < 0:
        raise ShapeError(f"invalid stride {stride} / pad {pad}")
    hs, ws = h + 2 * pad - kh, w + 2 * pad - kw
    if hs < 0 or ws < 0 or hs % stride or ws % stride:
        raise ShapeError(
            f"input {h}x{w} with pad {pad}, kernel {kh}x{kw}, stride {stride} gives a non-integral output"
        )
    return (n, o, hs // stride + 1, ws // stride + 1)


def _invert(matrix):
    # Gauss-Jordan over Fractions; the matrices here are at most 8x8
    n = len(matrix)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _evaluation(points, n, cols):
    rows = [[Fraction(a) ** k for k in range(cols)] for a in points]
    rows.append([Fraction(int(k == cols - 1)) for k in range(cols)])
    assert len(rows) == n
    return rows


@lru_cache(maxsize=None)
def winograd_matrices(m: int, r: int = 3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Transforms ``(AT, G, BT)`` of F(m, r) from the Cook-Toom construction.

    ``y = AT @ ((G @ g) * (BT @ d))`` is the valid correlation of a length
    ``m + r - 1`` signal ``d`` with an ``r``-tap filter ``g``.  The matrices
    follow from evaluating polynomials at the points in ``WINOGRAD_POINTS``
    (plus infinity) and transposing the resulting convolution algorithm.
    """
    if m not in WINOGRAD_POINTS:
        raise UnsupportedError(f"no Winograd points for output tile {m}")
    n = m + r - 1
    points = WINOGRAD_POINTS[m]
    vandermonde = _evaluation(points, n, n)
    interp = _invert(vandermonde)
    at = np.array(_evaluation(points, n, m), dtype=np.float64).T
    g = np.array(_evaluation(points, n, r), dtype=np.float64)
    bt = np.array(interp, dtype=np.float64).T
    return at, g, bt


def _conv_direct(x, w, stride, pad, counter):
    n, c, _, _ = x.shape
    o, _, kh, kw = w.shape
    _, _, ho, wo = conv2d_shape(x.shape, w.shape, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.einsum("nchwij,ocij->nohw", windows, w)
    if counter is not None:
        counter.add(n * o * c * ho * wo * kh * kw)
    return out.astype(np.float32, copy=False)


def _conv_winograd(x, w, pad, m, counter):
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    _, _, ho, wo = conv2d_shape(x.shape, w.shape, 1, pad)
    at, g, bt = winograd_matrices(m, 3)
    size = m + 2
    th, tw = math.ceil(ho / m), math.ceil(wo / m)
    # pad so the tiles cover the output; the overhang is cropped at the end
    xp = np.zeros((n, c, th * m + 2, tw * m + 2), dtype=np.float64)
    xp[:, :, pad:pad + h, pad:pad + wd] = x
    u = np.einsum("ai,ocij,bj->ocab", g, w.astype(np.float64), g)
    tiles = sliding_window_view(xp, (size, size), axis=(2, 3))[:, :, ::m, ::m]
    v = np.einsum("ai,nctuij,bj->nctuab", bt, tiles, bt)
    prod = np.einsum("ocab,nctuab->notuab", u, v)
    if counter is not None:
        counter.add(n * o * c * th * tw * size * size)
    y = np.einsum("ia,notuab,jb->notuij", at, prod, at)
    y = y.transpose(0, 1, 2, 4, 3, 5).reshape(n, o, th * m, tw * m)
    return np.ascontiguousarray(y[:, :, :ho, :wo], dtype=np.float32)


def conv2d(x, w, stride: int = 1, pad: int = 0, variant: AlgorithmVariant = DIRECT,
           counter: MulCounter | None = None) -> np.ndarray:
    """Cross-correlate ``x`` (N, C, H, W) with ``w`` (O, C, kH, kW)."""
    x, w = as_array(x), as_array(w)
    conv2d_shape(x.shape, w.shape, stride, pad)
    if variant.kind == "direct":
        return _conv_direct(x, w, stride, pad, counter)
    if variant.kind == "winograd":
        if w.shape[2:] != (3, 3) or stride != 1:
            raise UnsupportedError("Winograd needs a 3x3 kernel and stride 1")
        return _conv_winograd(x, w, pad, variant.m, counter)
    raise UnsupportedError(f"conv2d has no {variant} variant")
