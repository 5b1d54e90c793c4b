"""Reverse-mode gradients over atomic and raster operators, and a training loop."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .errors import DivergenceError, ModeError, ShapeError, UnsupportedError
from .geometry import RasterOp, _checked_indices
from .graph.execute import run_operator
from .graph.ir import ATOMIC, Graph, Operator
from .graph.order import topo_order
from .graph.passes import geometric_pass
from .graph.shapes import infer_operator, shape_inference
from .optim import OptimizerState
from .tensor import as_array


def _conv_grads(x, w, up, stride, pad):
    n, c, h, wd = x.shape
    _, _, kh, kw = w.shape
    ho, wo = up.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for i in range(kh):
        for j in range(kw):
            rows = slice(i, i + stride * (ho - 1) + 1, stride)
            cols = slice(j, j + stride * (wo - 1) + 1, stride)
            dxp[:, :, rows, cols] += np.einsum("nohw,oc->nchw", up, w[:, :, i, j])
            dw[:, :, i, j] = np.einsum("nohw,nchw->oc", up, xp[:, :, rows, cols])
    return [dxp[:, :, pad:pad + h, pad:pad + wd], dw]


def grad_atomic(kind: str, inputs: Sequence, upstream, attrs: Mapping | None = None,
                output=None) -> list[np.ndarray]:
    """Gradients of an atomic operator's inputs given the upstream gradient.

    ``output`` may be passed to reuse the forward result; it is recomputed
    otherwise.  ``sqrt`` reports a zero gradient at zero.
    """
    attrs = dict(attrs or {})
    xs = [as_array(x) for x in inputs]
    up = as_array(upstream)
    op = Operator("grad", kind, [f"in{i}" for i in range(len(xs))], ["out"], attrs)
    (expected,) = infer_operator(op, [x.shape for x in xs])
    if up.shape != tuple(expected):
        raise ShapeError(f"{kind}: upstream shape {up.shape} differs from output shape {expected}")
    if output is None and kind in ("exp", "sigmoid", "tanh", "sqrt"):
        output = run_operator(op, xs)[0]
    with np.errstate(all="ignore"):
        grads = _rules(kind, xs, up, attrs, output)
    return [np.asarray(g, dtype=np.float32).reshape(x.shape) for g, x in zip(grads, xs)]


def _rules(kind, xs, up, attrs, out):
    x = xs[0]
    if kind == "neg":
        return [-up]
    if kind == "square":
        return [2 * x * up]
    if kind == "sqrt":
        return [np.where(out > 0, up / (2 * out), 0)]
    if kind == "exp":
        return [up * out]
    if kind == "sigmoid":
        return [up * out * (1 - out)]
    if kind == "tanh":
        return [up * (1 - out * out)]
    if kind == "relu":
        return [np.where(x > 0, up, 0)]
    if kind == "add":
        return [up, up]
    if kind == "sub":
        return [up, -up]
    if kind == "mul":
        return [up * xs[1], up * x]
    if kind == "div":
        b = xs[1]
        return [up / b, -up * x / (b * b)]
    if kind == "max":
        first = x >= xs[1]
        return [np.where(first, up, 0), np.where(first, 0, up)]
    if kind == "reduce_sum":
        axis = int(attrs.get("axis", 0))
        return [np.broadcast_to(np.expand_dims(up, axis), x.shape)]
    if kind == "matmul":
        return [up @ xs[1].T, x.T @ up]
    if kind == "conv2d":
        return _conv_grads(x, xs[1], up, int(attrs.get("stride", 1)), int(attrs.get("pad", 0)))
    raise UnsupportedError(f"no gradient rule for {kind!r}")


def grad_raster(op: RasterOp, upstream, source_shapes: Sequence[Sequence[int]]) -> list[np.ndarray]:
    """Scatter the upstream gradient back along every region's movement.

    Sources read several times accumulate every contribution.
    """
    up = as_array(upstream)
    if up.shape != op.out_shape:
        raise ShapeError(f"upstream shape {up.shape} differs from raster output {op.out_shape}")
    flat_up = up.reshape(-1)
    grads = [np.zeros(math.prod(s), dtype=np.float32) for s in source_shapes]
    for region in op.regions:
        g = grads[region.src]
        si = _checked_indices(region.src_view, region.size, g.size, "source")
        di = _checked_indices(region.dst_view, region.size, flat_up.size, "destination")
        np.add.at(g, si.reshape(-1), flat_up[di.reshape(-1)])
    return [g.reshape(tuple(s)) for g, s in zip(grads, source_shapes)]


def _prepare(graph: Graph, feeds: Mapping[str, object]):
    if graph.has_control_flow():
        raise ModeError("gradients through control flow are not supported")
    shapes = shape_inference(graph, {k: np.shape(v) for k, v in feeds.items() if k in graph.inputs})
    lowered = geometric_pass(graph, shapes)
    return lowered, topo_order(lowered)


def _forward_backward(lowered: Graph, order, feeds, loss: str, wrt: Sequence[str]):
    env = dict(lowered.constants())
    env.update({k: as_array(v) for k, v in feeds.items()})
    for op in order:
        env.update(zip(op.outputs, run_operator(op, [env[t] for t in op.inputs])))
    value = env[loss]
    if value.size != 1:
        raise ShapeError(f"loss {loss!r} must be a scalar, got shape {value.shape}")
    grads = {loss: np.ones_like(value)}
    for op in reversed(order):
        up = grads.get(op.outputs[0])
        if up is None:
            continue
        args = [env[t] for t in op.inputs]
        if op.kind == "raster":
            ins = grad_raster(op.raster, up, [a.shape for a in args])
        elif op.category == ATOMIC:
            ins = grad_atomic(op.kind, args, up, op.attrs, env[op.outputs[0]])
        else:
            raise UnsupportedError(f"cannot differentiate {op.kind}")
        for t, g in zip(op.inputs, ins):
            grads[t] = grads[t] + g if t in grads else g
    out = {}
    for name in wrt:
        out[name] = grads.get(name, np.zeros_like(env[name]))
    return float(value.reshape(-1)[0]), out


def trainable(graph: Graph) -> list[str]:
    return [name for name, desc in graph.tensors.items() if desc.trainable]


def backward(graph: Graph, feeds: Mapping[str, object], loss: str | None = None,
             wrt: Sequence[str] | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Loss value and its gradients with respect to ``wrt``.

    ``wrt`` defaults to the graph's trainable tensors and ``loss`` to the
    graph's designated loss.  ``feeds`` may override constant tensors.
    """
    loss = loss or graph.loss
    if loss is None:
        raise ShapeError("no loss tensor designated")
    wrt = list(wrt) if wrt is not None else trainable(graph)
    lowered, order = _prepare(graph, feeds)
    return _forward_backward(lowered, order, feeds, loss, wrt)


def train(graph: Graph, feeds: Mapping[str, object], optimizer: OptimizerState, steps: int,
          params: Mapping[str, object] | None = None) -> tuple[dict[str, np.ndarray], list[float]]:
    """Full-batch training; returns the final parameters and the loss before each step."""
    if graph.loss is None:
        raise ShapeError("graph has no designated loss")
    if params is None:
        params = {name: graph.tensors[name].data for name in trainable(graph)}
    params = {k: as_array(v) for k, v in params.items()}
    lowered, order = _prepare(graph, feeds)
    losses = []
    for _ in range(steps):
        # a blow-up is reported below as DivergenceError, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            value, grads = _forward_backward(lowered, order, {**feeds, **params}, graph.loss, list(params))
        if not math.isfinite(value):
            raise DivergenceError(f"loss became {value} after {len(losses)} steps")
        losses.append(value)
        params = optimizer.step(params, grads)
    return params, losses

