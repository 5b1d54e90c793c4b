from __future__ import annotations

import heapq

from ..errors import CycleError
from .ir import Graph, Operator


def topo_order(graph: Graph) -> list[Operator]:
    """Operators with every producer before its consumers.

    Among ready operators the smallest id goes first, so the order is a
    function of the operator set alone.  Control-flow bodies are opaque.
    """
    producer = {}
    for op in graph.operators:
        for t in op.outputs:
            producer[t] = op.id
    by_id = {op.id: op for op in graph.operators}
    pending = {op.id: {producer[t] for t in op.inputs if t in producer}
               for op in graph.operators}
    users: dict[str, list[str]] = {}
    for op_id, deps in pending.items():
        for d in deps:
            users.setdefault(d, []).append(op_id)
    ready = [op_id for op_id, deps in pending.items() if not deps]
    heapq.heapify(ready)
    order = []
    while ready:
        op_id = heapq.heappop(ready)
        order.append(by_id[op_id])
        for u in users.get(op_id, ()):
            pending[u].discard(op_id)
            if not pending[u]:
                heapq.heappush(ready, u)
    if len(order) != len(graph.operators):
        stuck = sorted(set(by_id) - {op.id for op in order})
        raise CycleError(f"graph has a cycle through {stuck}")
    return order
