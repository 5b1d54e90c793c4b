"""Module-mode execution.

The graph is cut at every control-flow operator.  Maximal control-flow-free
stretches of the topological order become sub-graphs that run exactly like
sessions; ``if``/``while`` operators become control modules whose bodies
are split the same way, recursively.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from ..errors import GraphFormatError, RunawayLoopError, ShapeError
from ..search import BackendSpec
from ..tensor import as_array
from .ir import CONTROL_FLOW, Graph, Operator, TensorDesc
from .order import topo_order
from .session import Session

DEFAULT_MAX_ITERATIONS = 10_000


@dataclass
class SessionModule:
    graph: Graph
    _sessions: dict = field(default_factory=dict, repr=False, compare=False)

    def session(self, catalog: Sequence[BackendSpec]) -> Session:
        key = tuple(catalog)
        if key not in self._sessions:
            self._sessions[key] = Session(self.graph, catalog)
        return self._sessions[key]


@dataclass
class ControlModule:
    op: Operator
    bodies: dict[str, ModulePlan]


Module = Union[SessionModule, ControlModule]


@dataclass
class ModulePlan:
    modules: list[Module]
    inputs: list[str]
    outputs: list[str]
    constants: dict[str, np.ndarray]

    def __len__(self):
        return len(self.modules)

    def __iter__(self):
        return iter(self.modules)

    def __getitem__(self, i):
        return self.modules[i]


def _span_module(graph: Graph, span: list[Operator], needed_later: set[str]) -> SessionModule:
    produced = {t for op in span for t in op.outputs}
    consts = graph.constants()
    tensors: dict[str, TensorDesc] = {}
    inputs: list[str] = []
    for op in span:
        for t in op.inputs:
            if t in produced or t in tensors:
                continue
            desc = graph.tensors.get(t, TensorDesc(t))
            tensors[t] = TensorDesc(t, desc.shape, consts.get(t), desc.trainable)
            if t not in consts:
                inputs.append(t)
        for t in op.outputs:
            desc = graph.tensors.get(t, TensorDesc(t))
            tensors[t] = TensorDesc(t, desc.shape)
    outputs = [t for op in span for t in op.outputs if t in needed_later]
    return SessionModule(Graph(tensors, list(span), inputs, outputs))


def module_split(graph: Graph) -> ModulePlan:
    """Split ``graph`` into session modules and control-flow modules."""
    order = topo_order(graph)
    later_use: list[set[str]] = [set() for _ in order]
    tail = set(graph.outputs)
    for i in range(len(order) - 1, -1, -1):
        later_use[i] = set(tail)
        tail |= set(order[i].inputs)

    modules: list[Module] = []
    span: list[Operator] = []
    span_end = -1
    for i, op in enumerate(order):
        if op.category != CONTROL_FLOW:
            span.append(op)
            span_end = i
            continue
        if span:
            modules.append(_span_module(graph, span, later_use[span_end]))
            span = []
        names = ("then", "else") if op.kind == "if" else ("cond", "body")
        for name in names:
            if name not in op.subgraphs:
                raise GraphFormatError(f"{op.id}: {op.kind} needs a {name!r} sub-graph")
        modules.append(ControlModule(op, {name: module_split(op.subgraphs[name]) for name in names}))
    if span:
        modules.append(_span_module(graph, span, later_use[span_end]))
    return ModulePlan(modules, list(graph.inputs), list(graph.outputs), graph.constants())


def _scalar_truth(value: np.ndarray, where: str) -> bool:
    if value.size != 1:
        raise ShapeError(f"{where}: condition must be a scalar, got shape {value.shape}")
    return bool(value.reshape(-1)[0] != 0)


def _call(plan: ModulePlan, args: Sequence[np.ndarray], catalog) -> list[np.ndarray]:
    if len(args) != len(plan.inputs):
        raise ShapeError(f"sub-graph takes {len(plan.inputs)} inputs, got {len(args)}")
    outs = module_run(plan, dict(zip(plan.inputs, args)), catalog)
    return [outs[t] for t in plan.outputs]


def _run_control(module: ControlModule, env, catalog) -> list[np.ndarray]:
    op = module.op
    args = [env[t] for t in op.inputs]
    if op.kind == "if":
        branch = "then" if _scalar_truth(args[0], op.id) else "else"
        return _call(module.bodies[branch], args[1:], catalog)
    cap = int(op.attrs.get("max_iterations", DEFAULT_MAX_ITERATIONS))
    carried, steps = args, 0
    while _scalar_truth(_call(module.bodies["cond"], carried, catalog)[0], op.id):
        if steps >= cap:
            raise RunawayLoopError(f"{op.id}: while loop exceeded {cap} iterations")
        carried = _call(module.bodies["body"], carried, catalog)
        steps += 1
    return carried


def module_run(plan: ModulePlan, inputs: Mapping[str, object],
               catalog: Sequence[BackendSpec] | None = None) -> dict[str, np.ndarray]:
    """Execute a split graph; every session module is planned like a session."""
    catalog = list(catalog) if catalog else None
    env = dict(plan.constants)
    for name in plan.inputs:
        if name not in inputs:
            raise ShapeError(f"missing value for graph input {name!r}")
        env[name] = as_array(inputs[name])
    for module in plan.modules:
        if isinstance(module, SessionModule):
            sess = module.session(catalog or ())
            env.update(sess.run({t: env[t] for t in module.graph.inputs}))
        else:
            env.update(zip(module.op.outputs, _run_control(module, env, catalog)))
    return {t: env[t] for t in plan.outputs}
