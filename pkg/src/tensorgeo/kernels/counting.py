from __future__ import annotations

import math
from typing import Sequence

from ..errors import ShapeError, UnsupportedError
from .conv import conv2d_shape
from .elementwise import ELEMENTWISE_KINDS
from .variants import AlgorithmVariant

STREAMING_KINDS = ELEMENTWISE_KINDS + ("reduce_sum", "raster")


def strassen_count(a: int, e: int, b: int, cutoff: int) -> int:
    """Multiplications of the Strassen recursion, with odd dims padded up."""
    if min(a, e, b) <= cutoff:
        return a * e * b
    return 7 * strassen_count(math.ceil(a / 2), math.ceil(e / 2), math.ceil(b / 2), cutoff)


def q_count(op: str, variant: AlgorithmVariant, sizes: Sequence[int]) -> int:
    """Multiply-accumulate count of running ``op`` with ``variant``.

    ``sizes`` is ``(a, e, b)`` for matmul, ``(N, C, H, W, O, kH, kW, stride, pad)``
    for conv2d and ``(n,)`` (elements touched) for streaming operators.
    Additions inside Winograd/Strassen transforms are not counted.
    """
    sizes = tuple(int(s) for s in sizes)
    if op == "matmul":
        if len(sizes) != 3 or min(sizes) < 1:
            raise ShapeError(f"matmul sizes must be (a, e, b) >= 1, got {sizes}")
        a, e, b = sizes
        if variant.kind in ("direct", "tiled"):
            return a * e * b
        if variant.kind == "strassen":
            return strassen_count(a, e, b, variant.cutoff)
    elif op == "conv2d":
        if len(sizes) != 9:
            raise ShapeError(f"conv2d sizes must have 9 entries, got {sizes}")
        n, c, h, w, o, kh, kw, stride, pad = sizes
        _, _, ho, wo = conv2d_shape((n, c, h, w), (o, c, kh, kw), stride, pad)
        if variant.kind == "direct":
            return n * o * c * ho * wo * kh * kw
        if variant.kind == "winograd":
            if (kh, kw) != (3, 3) or stride != 1:
                raise UnsupportedError("Winograd needs a 3x3 kernel and stride 1")
            m = variant.m
            return n * o * c * math.ceil(ho / m) * math.ceil(wo / m) * (m + 2) ** 2
    elif op in STREAMING_KINDS:
        if len(sizes) != 1 or sizes[0] < 0:
            raise ShapeError(f"{op} sizes must be (n,), got {sizes}")
        if variant.kind == "direct":
            return sizes[0]
    else:
        raise UnsupportedError(f"no cost rule for operator {op!r}")
    raise UnsupportedError(f"{op} has no {variant} variant")
