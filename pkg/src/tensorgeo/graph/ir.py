"""Computation-graph IR: tensors, operators and graphs, plus a small builder."""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import GraphFormatError, ShapeError, UnsupportedError
from ..geometry import TRANSFORM_KINDS, RasterOp, decompose_transform
from ..kernels.elementwise import BINARY, ELEMENTWISE_KINDS, UNARY
from ..tensor import as_array

ATOMIC = "atomic"
TRANSFORM = "transform"
COMPOSITE = "composite"
CONTROL_FLOW = "control-flow"

ATOMIC_KINDS = ELEMENTWISE_KINDS + ("reduce_sum", "matmul", "conv2d", "raster")
COMPOSITE_KINDS = ("elu", "avg-pool2d", "layer-norm", "lstm-cell")
CONTROL_KINDS = ("if", "while")

CATEGORIES = {
    **{k: ATOMIC for k in ATOMIC_KINDS},
    **{k: TRANSFORM for k in TRANSFORM_KINDS},
    **{k: COMPOSITE for k in COMPOSITE_KINDS},
    **{k: CONTROL_FLOW for k in CONTROL_KINDS},
}

ARITY = {**{k: 1 for k in UNARY}, **{k: 2 for k in BINARY}, "reduce_sum": 1, "matmul": 2, "conv2d": 2}


def category_of(kind: str) -> str:
    try:
        return CATEGORIES[kind]
    except KeyError:
        raise UnsupportedError(f"unknown operator kind {kind!r}") from None


@dataclass
class TensorDesc:
    id: str
    shape: tuple[int, ...] | None = None
    data: np.ndarray | None = None
    trainable: bool = False

    def __post_init__(self):
        if self.data is not None:
            self.data = as_array(self.data)
            if self.shape is None:
                self.shape = self.data.shape
            self.data = self.data.reshape(self.shape)
        if self.shape is not None:
            self.shape = tuple(int(d) for d in self.shape)

    @property
    def is_constant(self) -> bool:
        return self.data is not None


@dataclass
class Operator:
    id: str
    kind: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict = field(default_factory=dict)
    subgraphs: dict[str, Graph] = field(default_factory=dict)

    def __post_init__(self):
        category_of(self.kind)
        self.inputs = list(self.inputs)
        self.outputs = list(self.outputs)

    @property
    def category(self) -> str:
        return CATEGORIES[self.kind]

    @property
    def raster(self) -> RasterOp:
        return self.attrs["raster"]


@dataclass
class Graph:
    tensors: dict[str, TensorDesc]
    operators: list[Operator]
    inputs: list[str]
    outputs: list[str]
    loss: str | None = None

    def producers(self) -> dict[str, Operator]:
        out = {}
        for op in self.operators:
            for t in op.outputs:
                if t in out:
                    raise GraphFormatError(f"tensor {t!r} has two producers")
                out[t] = op
        return out

    def consumers(self) -> dict[str, list[Operator]]:
        out: dict[str, list[Operator]] = {}
        for op in self.operators:
            for t in op.inputs:
                out.setdefault(t, []).append(op)
        return out

    def constants(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self.tensors.items() if t.data is not None}

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: t.shape for k, t in self.tensors.items() if t.shape is not None}

    def has_control_flow(self) -> bool:
        return any(op.category == CONTROL_FLOW for op in self.operators)

    def census(self) -> dict[str, int]:
        counts = {ATOMIC: 0, TRANSFORM: 0, COMPOSITE: 0, CONTROL_FLOW: 0}
        for op in self.operators:
            counts[op.category] += 1
        return counts

    def copy(self) -> Graph:
        return copy.deepcopy(self)

    def validate(self) -> Graph:
        """Check single-producer and defined-before-use invariants."""
        produced = self.producers()
        for name in self.tensors:
            if name in produced and (name in self.inputs or self.tensors[name].is_constant):
                raise GraphFormatError(f"tensor {name!r} is both produced and an input/constant")
        known = set(produced) | set(self.inputs) | set(self.constants())
        for op in self.operators:
            for t in op.inputs:
                if t not in known:
                    raise GraphFormatError(f"operator {op.id!r} reads undefined tensor {t!r}")
            if op.category == ATOMIC and op.kind in ARITY and len(op.inputs) != ARITY[op.kind]:
                raise GraphFormatError(f"{op.kind} {op.id!r} takes {ARITY[op.kind]} inputs")
        for t in self.outputs:
            if t not in known:
                raise GraphFormatError(f"graph output {t!r} is never defined")
        if len({op.id for op in self.operators}) != len(self.operators):
            raise GraphFormatError("duplicate operator ids")
        return self


def raster_operator(op_id: str, raster: RasterOp, inputs: Sequence[str], output: str) -> Operator:
    return Operator(op_id, "raster", list(inputs), [output], {"raster": raster})


class GraphBuilder:
    """Imperative helper for assembling graphs.

    >>> b = GraphBuilder()
    >>> x = b.input("x", (2, 3))
    >>> y = b.op("relu", [x])
    >>> g = b.build([y])
    """

    def __init__(self, prefix: str = ""):
        self.prefix = prefix
        self.tensors: dict[str, TensorDesc] = {}
        self.operators: list[Operator] = []
        self.inputs: list[str] = []
        self._ids = itertools.count()

    def _fresh(self, stem: str) -> str:
        while True:
            name = f"{self.prefix}{stem}{next(self._ids)}"
            if name not in self.tensors and all(op.id != name for op in self.operators):
                return name

    def input(self, name: str, shape=None) -> str:
        self.tensors[name] = TensorDesc(name, shape)
        self.inputs.append(name)
        return name

    def const(self, value, name: str | None = None, trainable: bool = False) -> str:
        name = name or self._fresh("c")
        self.tensors[name] = TensorDesc(name, data=np.asarray(value, dtype=np.float32), trainable=trainable)
        return name

    def op(self, kind: str, inputs: Sequence[str], attrs: Mapping | None = None, *,
           id: str | None = None, outputs: Sequence[str] | int = 1,
           subgraphs: Mapping[str, Graph] | None = None):
        """Append an operator; returns its output name (or list of names if several)."""
        op_id = id or self._fresh("op")
        if isinstance(outputs, int):
            outputs = [self._fresh("t") for _ in range(outputs)]
        for t in outputs:
            self.tensors.setdefault(t, TensorDesc(t))
        self.operators.append(Operator(op_id, kind, list(inputs), list(outputs), dict(attrs or {}),
                                       dict(subgraphs or {})))
        return outputs[0] if len(outputs) == 1 else list(outputs)

    def transform(self, kind: str, x: str, in_shape, **params) -> str:
        """Emit ``kind`` on ``x`` directly as a raster node."""
        raster = decompose_transform(kind, params, [in_shape])
        return self.op("raster", [x], {"raster": raster})

    def build(self, outputs: Iterable[str], loss: str | None = None) -> Graph:
        return Graph(dict(self.tensors), list(self.operators), list(self.inputs), list(outputs), loss)


def scalar_shape(shape) -> bool:
    if shape is None:
        raise ShapeError("shape unknown")
    return int(np.prod(shape, dtype=np.int64)) == 1
