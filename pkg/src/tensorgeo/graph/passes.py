"""Geometric pass: decompose transforms and composites, then merge rasters."""

from __future__ import annotations

import copy
from typing import Mapping

from ..geometry import RasterOp, Region, decompose_transform, merge_horizontal, merge_vertical
from ..kernels.composite import lower_composite
from .ir import COMPOSITE, TRANSFORM, Graph, Operator, TensorDesc, raster_operator
from .order import topo_order
from .shapes import shape_inference


def _decompose(graph: Graph, shapes) -> tuple[list[Operator], dict[str, TensorDesc]]:
    tensors = copy.deepcopy(graph.tensors)
    ops: list[Operator] = []
    for op in topo_order(graph):
        in_shapes = [shapes[t] for t in op.inputs]
        if op.category == TRANSFORM:
            raster = decompose_transform(op.kind, op.attrs, in_shapes)
            ops.append(raster_operator(op.id, raster, op.inputs, op.outputs[0]))
        elif op.category == COMPOSITE:
            sub = lower_composite(op.kind, op.attrs, in_shapes, prefix=f"{op.id}/")
            sub_shapes = shape_inference(sub, dict(zip(sub.inputs, in_shapes)))
            rename = {**dict(zip(sub.inputs, op.inputs)), **dict(zip(sub.outputs, op.outputs))}
            for name, desc in sub.tensors.items():
                if name not in rename:
                    tensors[name] = TensorDesc(name, sub_shapes.get(name), desc.data)
                    shapes[name] = sub_shapes[name]
            for sop in sub.operators:
                ops.append(Operator(sop.id, sop.kind, [rename.get(t, t) for t in sop.inputs],
                                    [rename.get(t, t) for t in sop.outputs], dict(sop.attrs)))
        else:
            ops.append(copy.deepcopy(op))
    return ops, tensors


def _merge_vertical_once(ops: list[Operator]) -> bool:
    producer = {t: op for op in ops for t in op.outputs}
    for i, op in enumerate(ops):
        if op.kind != "raster" or len(op.inputs) != 1:
            continue
        prev = producer.get(op.inputs[0])
        if prev is None or prev.kind != "raster":
            continue
        merged = merge_vertical(prev.raster, op.raster)
        if merged is None:
            continue
        (region,) = merged.regions
        source = prev.inputs[region.src]
        merged = RasterOp((Region(0, region.size, region.src_view, region.dst_view),), merged.out_shape)
        ops[i] = raster_operator(op.id, merged, [source], op.outputs[0])
        return True
    return False


def _merge_horizontal_once(ops: list[Operator], pinned: set[str]) -> bool:
    seen: dict[tuple, Operator] = {}
    for dup in ops:
        if dup.kind != "raster":
            continue
        key = (tuple(dup.inputs), dup.raster.canonical())
        keep = seen.get(key)
        if keep is None:
            seen[key] = dup
            continue
        if dup.outputs[0] in pinned or merge_horizontal(keep.raster, dup.raster) is None:
            continue
        old, new = dup.outputs[0], keep.outputs[0]
        ops.remove(dup)
        for op in ops:
            op.inputs = [new if t == old else t for t in op.inputs]
        return True
    return False


def _drop_dead_rasters(ops: list[Operator], pinned: set[str]) -> bool:
    used = {t for op in ops for t in op.inputs} | pinned
    dead = [op for op in ops if op.kind == "raster" and op.outputs[0] not in used]
    for op in dead:
        ops.remove(op)
    return bool(dead)


def geometric_pass(graph: Graph, shapes: Mapping[str, tuple] | None = None) -> Graph:
    """Rewrite ``graph`` into atomic, raster and control-flow operators only.

    Transform operators become single rasters, composites are inlined as
    their lowered sub-graphs, and rasters are then merged vertically
    (producer/consumer chains) and horizontally (duplicates) until nothing
    changes.  Running the pass on its own output is a no-op.
    """
    shapes = dict(shapes) if shapes is not None else shape_inference(graph)
    ops, tensors = _decompose(graph, shapes)
    pinned = set(graph.outputs) | ({graph.loss} if graph.loss else set())
    while (_merge_vertical_once(ops) or _merge_horizontal_once(ops, pinned)
           or _drop_dead_rasters(ops, pinned)):
        pass
    live = {t for op in ops for t in op.inputs + op.outputs} | set(graph.inputs) | pinned
    tensors = {k: v for k, v in tensors.items() if k in live}
    for name, desc in tensors.items():
        if name in shapes:
            desc.shape = tuple(shapes[name])
    out = Graph(tensors, ops, list(graph.inputs), list(graph.outputs), graph.loss)
    out.operators = topo_order(out)
    return out
