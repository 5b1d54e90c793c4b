"""Lowering of composite operators into atomic and raster operators."""

from __future__ import annotations

from typing import Mapping, Sequence

from ..errors import ShapeError, UnsupportedError
from ..geometry import RasterOp, Region, View, _row_major
from ..graph.ir import Graph, GraphBuilder

LSTM_INPUTS = ("x", "h", "c", "w", "u", "b")


def _fill(b: GraphBuilder, value: float, shape) -> str:
    """Constant ``value`` broadcast to ``shape`` through a stride-0 raster."""
    scalar = b.const(value)
    return b.transform("broadcast", scalar, (), shape=shape)


def _expand_last(b: GraphBuilder, t: str, reduced, full) -> str:
    # repeat a tensor reduced over the last axis back along that axis
    region = Region(0, full, View(0, _row_major(reduced) + (0,)), View(0, _row_major(full)))
    return b.op("raster", [t], {"raster": RasterOp((region,), full)})


def _lower_elu(b, shapes, attrs):
    (shape,) = shapes
    x = b.input("x", shape)
    alpha = float(attrs.get("alpha", 1.0))
    # elu(x) = relu(x) - alpha * relu(1 - exp(x))
    shrink = b.op("relu", [b.op("sub", [_fill(b, 1.0, shape), b.op("exp", [x])])])
    neg = b.op("mul", [_fill(b, alpha, shape), shrink])
    return [b.op("sub", [b.op("relu", [x]), neg])]


def _pair(v):
    return (int(v), int(v)) if isinstance(v, (int, float)) else tuple(int(i) for i in v)


def _lower_avg_pool(b, shapes, attrs):
    (shape,) = shapes
    if len(shape) != 4:
        raise ShapeError(f"avg-pool2d needs a rank-4 input, got {shape}")
    kh, kw = _pair(attrs.get("kernel", 2))
    sh, sw = _pair(attrs.get("stride", (kh, kw)))
    ph, pw = _pair(attrs.get("pad", 0))
    n, c, h, w = shape
    ho, wo = (h + 2 * ph - kh) // sh + 1, (w + 2 * pw - kw) // sw + 1
    if kh < 1 or kw < 1 or sh < 1 or sw < 1 or ph < 0 or pw < 0 or ho < 1 or wo < 1:
        raise ShapeError(f"invalid pooling geometry for input {shape}")
    x = b.input("x", shape)

    def valid(k, stride, pad, extent, out):
        # output positions whose tap k lands inside the unpadded input
        lo = max(0, -((k - pad) // stride))
        hi = min(out - 1, (extent - 1 + pad - k) // stride)
        return lo, hi

    window = (kh * kw, n, c, ho, wo)
    dst_strides = _row_major(window)[1:]
    regions = []
    for i in range(kh):
        hlo, hhi = valid(i, sh, ph, h, ho)
        for j in range(kw):
            wlo, whi = valid(j, sw, pw, w, wo)
            if hlo > hhi or wlo > whi:
                continue  # tap only ever sees padding
            src = View((hlo * sh + i - ph) * w + (wlo * sw + j - pw), (c * h * w, h * w, sh * w, sw))
            dst = View((i * kw + j) * n * c * ho * wo + hlo * wo + wlo, dst_strides)
            regions.append(Region(0, (n, c, hhi - hlo + 1, whi - wlo + 1), src, dst))
    taps = b.op("raster", [x], {"raster": RasterOp(tuple(regions), window)})
    total = b.op("reduce_sum", [taps], {"axis": 0})
    return [b.op("mul", [total, _fill(b, 1.0 / (kh * kw), (n, c, ho, wo))])]


def _lower_layer_norm(b, shapes, attrs):
    shape = tuple(shapes[0])
    if not shape:
        raise ShapeError("layer-norm needs rank >= 1")
    eps = float(attrs.get("eps", 1e-5))
    x = b.input("x", shape)
    reduced, axis, d = shape[:-1], len(shape) - 1, shape[-1]
    inv_d = _fill(b, 1.0 / d, reduced)
    mean = b.op("mul", [b.op("reduce_sum", [x], {"axis": axis}), inv_d])
    centered = b.op("sub", [x, _expand_last(b, mean, reduced, shape)])
    var = b.op("mul", [b.op("reduce_sum", [b.op("square", [centered])], {"axis": axis}), inv_d])
    std = b.op("sqrt", [b.op("add", [var, _fill(b, eps, reduced)])])
    y = b.op("div", [centered, _expand_last(b, std, reduced, shape)])
    if len(shapes) >= 2:
        if tuple(shapes[1]) != (d,):
            raise ShapeError(f"layer-norm scale must have shape ({d},)")
        y = b.op("mul", [y, b.transform("broadcast", b.input("gamma", (d,)), (d,), shape=shape)])
    if len(shapes) == 3:
        if tuple(shapes[2]) != (d,):
            raise ShapeError(f"layer-norm shift must have shape ({d},)")
        y = b.op("add", [y, b.transform("broadcast", b.input("beta", (d,)), (d,), shape=shape)])
    if len(shapes) > 3:
        raise ShapeError("layer-norm takes at most 3 inputs")
    return [y]


def _lower_lstm_cell(b, shapes, attrs):
    if len(shapes) != 6:
        raise ShapeError("lstm-cell takes inputs (x, h, c, w, u, b)")
    xs, hs, cs, ws, us, bs = (tuple(s) for s in shapes)
    batch, hidden = hs
    if (cs != hs or len(xs) != 2 or xs[0] != batch or ws != (xs[1], 4 * hidden)
            or us != (hidden, 4 * hidden) or bs != (4 * hidden,)):
        raise ShapeError(f"inconsistent lstm-cell shapes {shapes}")
    x, h, c, w, u, bias = (b.input(name, s) for name, s in zip(LSTM_INPUTS, shapes))
    z = b.op("add", [b.op("matmul", [x, w]), b.op("matmul", [h, u])])
    z = b.op("add", [z, b.transform("broadcast", bias, bs, shape=(batch, 4 * hidden))])
    zshape = (batch, 4 * hidden)
    # gate order: input, forget, cell candidate, output
    gi, gf, gg, go = (
        b.transform("slice", z, zshape, begin=(0, k * hidden), size=(batch, hidden)) for k in range(4)
    )
    i, f, o = b.op("sigmoid", [gi]), b.op("sigmoid", [gf]), b.op("sigmoid", [go])
    g = b.op("tanh", [gg])
    c_next = b.op("add", [b.op("mul", [f, c]), b.op("mul", [i, g])])
    h_next = b.op("mul", [o, b.op("tanh", [c_next])])
    return [h_next, c_next]


_LOWERINGS = {
    "elu": _lower_elu,
    "avg-pool2d": _lower_avg_pool,
    "layer-norm": _lower_layer_norm,
    "lstm-cell": _lower_lstm_cell,
}


def lower_composite(kind: str, params: Mapping, input_shapes: Sequence[Sequence[int]],
                    prefix: str = "") -> Graph:
    """Sub-graph of atomic and raster operators computing ``kind``.

    Graph inputs follow the composite's input order; every operator and
    constant id starts with ``prefix``.
    """
    if kind not in _LOWERINGS:
        raise UnsupportedError(f"no lowering for composite {kind!r}")
    shapes = [tuple(int(d) for d in s) for s in input_shapes]
    if kind in ("elu", "avg-pool2d") and len(shapes) != 1:
        raise ShapeError(f"{kind} takes exactly one input")
    b = GraphBuilder(prefix)
    outputs = _LOWERINGS[kind](b, shapes, params)
    return b.build(outputs)


def composite_output_count(kind: str) -> int:
    return 2 if kind == "lstm-cell" else 1

