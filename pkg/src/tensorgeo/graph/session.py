"""Session-mode execution: the whole graph planned and run in one go."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import ModeError, NoBackendError
from ..search import DEFAULT_CATALOG, BackendSpec, CostBreakdown, Workload, select_backend
from ..tensor import as_array
from .execute import bind_inputs, run_operator
from .ir import CONTROL_FLOW, Graph, Operator
from .order import topo_order
from .passes import geometric_pass
from .shapes import shape_inference


def operator_workload(op: Operator, shapes: Mapping[str, tuple]) -> Workload:
    """Cost-model view of an atomic or raster operator."""
    ins = [shapes[t] for t in op.inputs]
    if op.kind == "matmul":
        (a, e), (_, b) = ins
        sizes = (a, e, b)
    elif op.kind == "conv2d":
        (n, c, h, w), (o, _, kh, kw) = ins
        sizes = (n, c, h, w, o, kh, kw, int(op.attrs.get("stride", 1)), int(op.attrs.get("pad", 0)))
    elif op.kind == "raster":
        sizes = (op.raster.moved_elements,)
    elif op.kind == "reduce_sum":
        sizes = (math.prod(ins[0]),)
    else:
        sizes = (math.prod(shapes[op.outputs[0]]),)
    return Workload(op.kind, sizes, op.id)


def graph_workloads(graph: Graph, shapes: Mapping[str, tuple] | None = None) -> list[Workload]:
    shapes = shapes if shapes is not None else graph.shapes()
    return [operator_workload(op, shapes) for op in topo_order(graph) if op.category != CONTROL_FLOW]


@dataclass
class SessionPlan:
    """Everything decided before the first kernel runs."""

    graph: Graph
    order: list[Operator]
    shapes: dict[str, tuple]
    selected: BackendSpec
    selected_cost: CostBreakdown
    executed: BackendSpec
    executed_cost: CostBreakdown


def plan_session(graph: Graph, input_shapes: Mapping[str, Sequence[int]],
                 catalog: Sequence[BackendSpec] | None = None) -> SessionPlan:
    """Topological order, shape inference, geometric pass and backend search."""
    if graph.has_control_flow():
        raise ModeError("session mode cannot run control-flow operators; use module mode")
    catalog = list(catalog) if catalog else list(DEFAULT_CATALOG)
    topo_order(graph)
    shapes = shape_inference(graph, input_shapes)
    lowered = geometric_pass(graph, shapes)
    shapes = {**shapes, **lowered.shapes()}
    workloads = graph_workloads(lowered, shapes)
    selected, selected_cost = select_backend(workloads, catalog)
    executed, executed_cost = selected, selected_cost
    if not selected.executable:
        runnable = [spec for spec in catalog if spec.executable]
        if not runnable:
            raise NoBackendError(f"{selected.name} cannot execute and no executable backend is listed")
        executed, executed_cost = select_backend(workloads, runnable)
    return SessionPlan(lowered, topo_order(lowered), shapes, selected, selected_cost,
                       executed, executed_cost)


class Session:
    """A graph bound to a backend catalog; plans are cached per input shapes.

    After :meth:`run`, ``plan`` holds the last plan and ``peak_bytes`` the
    largest total size of simultaneously live intermediate tensors.
    """

    def __init__(self, graph: Graph, catalog: Sequence[BackendSpec] | None = None, validate: bool = False):
        self.graph = graph
        self.catalog = list(catalog) if catalog else list(DEFAULT_CATALOG)
        self.validate = validate
        self.plan: SessionPlan | None = None
        self.peak_bytes = 0
        self._plans: dict[tuple, SessionPlan] = {}

    def prepare(self, input_shapes: Mapping[str, Sequence[int]]) -> SessionPlan:
        key = tuple((name, tuple(input_shapes[name])) for name in self.graph.inputs if name in input_shapes)
        if key not in self._plans:
            self._plans[key] = plan_session(self.graph, input_shapes, self.catalog)
        self.plan = self._plans[key]
        return self.plan

    def run(self, inputs: Mapping[str, object]) -> dict[str, np.ndarray]:
        arrays = {k: as_array(v) for k, v in inputs.items()}
        plan = self.prepare({k: v.shape for k, v in arrays.items()})
        variants = plan.executed_cost.variants()
        env = bind_inputs(plan.graph, arrays)
        keep = set(plan.graph.outputs)
        last_use = {t: i for i, op in enumerate(plan.order) for t in op.inputs}
        live = peak = 0
        for i, op in enumerate(plan.order):
            outs = run_operator(op, [env[t] for t in op.inputs], variants[op.id], self.validate)
            for t, value in zip(op.outputs, outs):
                env[t] = value
                live += value.nbytes
            peak = max(peak, live)
            for t in set(op.inputs):
                if last_use.get(t) == i and t not in keep and t in env and _is_intermediate(plan.graph, t):
                    live -= env.pop(t).nbytes
        self.peak_bytes = peak
        return {t: env[t] for t in plan.graph.outputs}


def _is_intermediate(graph: Graph, name: str) -> bool:
    desc = graph.tensors.get(name)
    return name not in graph.inputs and not (desc is not None and desc.is_constant)


def session_run(graph: Graph, inputs: Mapping[str, object],
                catalog: Sequence[BackendSpec] | None = None) -> dict[str, np.ndarray]:
    return Session(graph, catalog).run(inputs)
