from __future__ import annotations

from typing import Mapping, Sequence

from ..errors import AxisError, GraphFormatError, ShapeError
from ..geometry import decompose_transform
from ..kernels.composite import lower_composite
from ..kernels.conv import conv2d_shape
from ..kernels.elementwise import BINARY, UNARY
from ..kernels.matmul import matmul_shape
from .ir import COMPOSITE, TRANSFORM, Graph, Operator, scalar_shape
from .order import topo_order

Shape = tuple[int, ...]


def _conv_params(op: Operator) -> tuple[int, int]:
    return int(op.attrs.get("stride", 1)), int(op.attrs.get("pad", 0))


def infer_operator(op: Operator, shapes: Sequence[Shape]) -> list[Shape]:
    """Output shapes of ``op`` given its input shapes."""
    kind = op.kind
    if kind in UNARY:
        return [tuple(shapes[0])]
    if kind in BINARY:
        if tuple(shapes[0]) != tuple(shapes[1]):
            raise ShapeError(f"{op.id}: {kind} operands have shapes {shapes[0]} and {shapes[1]}")
        return [tuple(shapes[0])]
    if kind == "reduce_sum":
        axis = int(op.attrs.get("axis", 0))
        if not 0 <= axis < len(shapes[0]):
            raise AxisError(f"{op.id}: axis {axis} out of range for shape {shapes[0]}")
        return [tuple(d for k, d in enumerate(shapes[0]) if k != axis)]
    if kind == "matmul":
        return [matmul_shape(shapes[0], shapes[1])]
    if kind == "conv2d":
        return [conv2d_shape(shapes[0], shapes[1], *_conv_params(op))]
    if kind == "raster":
        raster = op.raster
        if len(shapes) < raster.num_sources:
            raise ShapeError(f"{op.id}: raster reads {raster.num_sources} sources, got {len(shapes)}")
        return [raster.out_shape]
    if op.category == TRANSFORM:
        return [decompose_transform(kind, op.attrs, shapes).out_shape]
    if op.category == COMPOSITE:
        sub = lower_composite(kind, op.attrs, shapes)
        inferred = shape_inference(sub, dict(zip(sub.inputs, shapes)))
        return [inferred[t] for t in sub.outputs]
    if kind == "if":
        return _infer_if(op, shapes)
    if kind == "while":
        return _infer_while(op, shapes)
    raise GraphFormatError(f"no shape rule for {kind!r}")


def _run_sub(op, name, shapes) -> list[Shape]:
    try:
        sub = op.subgraphs[name]
    except KeyError:
        raise GraphFormatError(f"{op.id}: {op.kind} needs a {name!r} sub-graph") from None
    if len(sub.inputs) != len(shapes):
        raise ShapeError(f"{op.id}: {name} takes {len(sub.inputs)} inputs, got {len(shapes)}")
    inferred = shape_inference(sub, dict(zip(sub.inputs, shapes)))
    return [inferred[t] for t in sub.outputs]


def _infer_if(op, shapes):
    if not shapes or not scalar_shape(shapes[0]):
        raise ShapeError(f"{op.id}: if condition must be a scalar")
    args = shapes[1:]
    then, other = _run_sub(op, "then", args), _run_sub(op, "else", args)
    if then != other:
        raise ShapeError(f"{op.id}: if branches produce {then} and {other}")
    return then


def _infer_while(op, shapes):
    carried = [tuple(s) for s in shapes]
    cond = _run_sub(op, "cond", carried)
    if len(cond) != 1 or not scalar_shape(cond[0]):
        raise ShapeError(f"{op.id}: while condition must produce one scalar")
    body = _run_sub(op, "body", carried)
    if body != carried:
        raise ShapeError(f"{op.id}: while body changes loop shapes {carried} -> {body}")
    return body


def shape_inference(graph: Graph, input_shapes: Mapping[str, Sequence[int]] | None = None) -> dict[str, Shape]:
    """Shapes of every tensor reachable from the inputs and constants."""
    shapes: dict[str, Shape] = {}
    for name, desc in graph.tensors.items():
        if desc.is_constant:
            shapes[name] = desc.shape
    input_shapes = dict(input_shapes or {})
    for name in graph.inputs:
        if name in input_shapes:
            shapes[name] = tuple(int(d) for d in input_shapes[name])
        elif graph.tensors.get(name) is not None and graph.tensors[name].shape is not None:
            shapes[name] = graph.tensors[name].shape
        else:
            raise ShapeError(f"no shape given for graph input {name!r}")
    for op in topo_order(graph):
        try:
            ins = [shapes[t] for t in op.inputs]
        except KeyError as exc:
            raise ShapeError(f"{op.id}: input {exc.args[0]!r} has no shape") from None
        outs = infer_operator(op, ins)
        if len(outs) != len(op.outputs):
            raise ShapeError(f"{op.id}: produces {len(outs)} tensors but declares {len(op.outputs)}")
        shapes.update(zip(op.outputs, outs))
    return shapes

