from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..errors import GraphFormatError, ModeError, ShapeError
from ..geometry import decompose_transform, raster_execute
from ..kernels.composite import lower_composite
from ..kernels.conv import conv2d
from ..kernels.elementwise import ELEMENTWISE_KINDS, elementwise, reduce_sum
from ..kernels.matmul import matmul
from ..kernels.variants import DIRECT, AlgorithmVariant
from ..tensor import as_array
from .ir import COMPOSITE, CONTROL_FLOW, TRANSFORM, Graph, Operator
from .order import topo_order


def run_operator(op: Operator, args: Sequence[np.ndarray], variant: AlgorithmVariant = DIRECT,
                 validate: bool = False) -> list[np.ndarray]:
    """Execute one non-control-flow operator on concrete arrays."""
    kind = op.kind
    if kind in ELEMENTWISE_KINDS:
        return [elementwise(kind, *args)]
    if kind == "reduce_sum":
        return [reduce_sum(args[0], int(op.attrs.get("axis", 0)))]
    if kind == "matmul":
        return [matmul(args[0], args[1], variant)]
    if kind == "conv2d":
        return [conv2d(args[0], args[1], int(op.attrs.get("stride", 1)), int(op.attrs.get("pad", 0)), variant)]
    if kind == "raster":
        return [raster_execute(op.raster, args, validate=validate)]
    if op.category == TRANSFORM:
        raster = decompose_transform(kind, op.attrs, [np.shape(a) for a in args])
        return [raster_execute(raster, args, validate=validate)]
    if op.category == COMPOSITE:
        sub = lower_composite(kind, op.attrs, [np.shape(a) for a in args])
        outs = evaluate(sub, dict(zip(sub.inputs, args)))
        return [outs[t] for t in sub.outputs]
    if op.category == CONTROL_FLOW:
        raise ModeError(f"{op.id}: control flow needs the module executor")
    raise GraphFormatError(f"cannot execute {kind!r}")


def bind_inputs(graph: Graph, feeds: Mapping[str, object]) -> dict[str, np.ndarray]:
    """Initial tensor environment: constants plus the fed graph inputs."""
    env = {name: data for name, data in graph.constants().items()}
    for name in graph.inputs:
        if name not in feeds:
            raise ShapeError(f"missing value for graph input {name!r}")
        env[name] = as_array(feeds[name])
    return env


def evaluate(graph: Graph, feeds: Mapping[str, object]) -> dict[str, np.ndarray]:
    """Run ``graph`` op by op with direct kernels and no graph optimisation."""
    env = bind_inputs(graph, feeds)
    for op in topo_order(graph):
        env.update(zip(op.outputs, run_operator(op, [env[t] for t in op.inputs])))
    return {t: env[t] for t in graph.outputs}
