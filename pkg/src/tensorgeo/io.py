"""JSON documents: graphs, tensor bundles and backend catalogs.

Graph document::

    {"tensors":   [{"id": "w", "shape": [3, 4], "data": [...], "trainable": true}, ...],
     "operators": [{"id": "mm", "kind": "matmul", "category": "atomic",
                    "attributes": {}, "inputs": ["x", "w"], "outputs": ["y"],
                    "subgraphs": {"then": {...}, "else": {...}}}, ...],
     "inputs": ["x"], "outputs": ["y"], "loss": "l"}

``data``, ``trainable``, ``subgraphs`` and ``loss`` are optional.  Raster
operators carry ``{"out_shape": [...], "regions": [{"src": 0, "range": [...],
"src_view": {"offset": 0, "strides": [...]}, "dst_view": {...}}]}`` as their
attributes.  Tensor bundles are ``{"tensors": [{"id", "shape", "data"}]}``
with row-major flat data; catalogs are ``{"backends": [{...BackendSpec...}]}``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import EngineError, GraphFormatError
from .geometry import RasterOp, Region, View
from .graph.ir import Graph, Operator, TensorDesc, category_of
from .search import BackendSpec

CATALOG_FIELDS = {
    "name", "kind", "registers", "simd_width", "frequency", "fp16", "flops",
    "schedule_cost", "executable", "ops",
}


def _plain(value):
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def _flat(data: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(data, dtype=np.float32).reshape(-1)]


def raster_to_doc(raster: RasterOp) -> dict:
    return {
        "out_shape": list(raster.out_shape),
        "regions": [
            {
                "src": r.src,
                "range": list(r.size),
                "src_view": {"offset": r.src_view.offset, "strides": list(r.src_view.strides)},
                "dst_view": {"offset": r.dst_view.offset, "strides": list(r.dst_view.strides)},
            }
            for r in raster.regions
        ],
    }


def raster_from_doc(doc: Mapping) -> RasterOp:
    try:
        regions = tuple(
            Region(int(r["src"]), tuple(r["range"]),
                   View(r["src_view"]["offset"], tuple(r["src_view"]["strides"])),
                   View(r["dst_view"]["offset"], tuple(r["dst_view"]["strides"])))
            for r in doc["regions"]
        )
        return RasterOp(regions, tuple(doc["out_shape"]))
    except (KeyError, TypeError) as exc:
        raise GraphFormatError(f"malformed raster attributes: {exc}") from None


def graph_to_doc(graph: Graph) -> dict:
    tensors = []
    for desc in graph.tensors.values():
        entry = {"id": desc.id, "shape": None if desc.shape is None else list(desc.shape)}
        if desc.data is not None:
            entry["data"] = _flat(desc.data)
        if desc.trainable:
            entry["trainable"] = True
        tensors.append(entry)
    operators = []
    for op in graph.operators:
        attrs = raster_to_doc(op.raster) if op.kind == "raster" else _plain(op.attrs)
        entry = {"id": op.id, "kind": op.kind, "category": op.category, "attributes": attrs,
                 "inputs": list(op.inputs), "outputs": list(op.outputs)}
        if op.subgraphs:
            entry["subgraphs"] = {k: graph_to_doc(g) for k, g in op.subgraphs.items()}
        operators.append(entry)
    doc = {"tensors": tensors, "operators": operators,
           "inputs": list(graph.inputs), "outputs": list(graph.outputs)}
    if graph.loss is not None:
        doc["loss"] = graph.loss
    return doc


def graph_from_doc(doc: Mapping) -> Graph:
    try:
        tensors = {}
        for entry in doc.get("tensors", []):
            shape = entry.get("shape")
            data = entry.get("data")
            if data is not None:
                data = np.asarray(data, dtype=np.float32)
                if shape is not None and data.size != math.prod(shape):
                    raise GraphFormatError(f"tensor {entry['id']!r}: data does not match shape {shape}")
            tensors[entry["id"]] = TensorDesc(entry["id"], shape, data, bool(entry.get("trainable", False)))
        operators = []
        for entry in doc.get("operators", []):
            kind = entry["kind"]
            category = category_of(kind)
            if entry.get("category", category) != category:
                raise GraphFormatError(f"operator {entry['id']!r}: {kind} is {category}, "
                                       f"not {entry['category']}")
            attrs = dict(entry.get("attributes", {}))
            if kind == "raster":
                attrs = {"raster": raster_from_doc(attrs)}
            subgraphs = {k: graph_from_doc(g) for k, g in entry.get("subgraphs", {}).items()}
            operators.append(Operator(entry["id"], kind, entry["inputs"], entry["outputs"], attrs, subgraphs))
        for op in operators:
            for t in op.inputs + op.outputs:
                tensors.setdefault(t, TensorDesc(t))
        graph = Graph(tensors, operators, list(doc["inputs"]), list(doc["outputs"]), doc.get("loss"))
        return graph.validate()
    except GraphFormatError:
        raise
    except (KeyError, TypeError, ValueError, EngineError) as exc:
        raise GraphFormatError(f"invalid graph document: {exc}") from None


def tensors_to_doc(values: Mapping[str, np.ndarray]) -> dict:
    return {"tensors": [{"id": k, "shape": list(np.shape(v)), "data": _flat(v)} for k, v in values.items()]}


def tensors_from_doc(doc: Mapping) -> dict[str, np.ndarray]:
    try:
        out = {}
        for entry in doc["tensors"]:
            data = np.asarray(entry["data"], dtype=np.float32)
            out[entry["id"]] = data.reshape(tuple(entry["shape"]))
        return out
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"invalid tensor document: {exc}") from None


def catalog_from_doc(doc: Mapping) -> list[BackendSpec]:
    try:
        specs = []
        for entry in doc["backends"]:
            unknown = set(entry) - CATALOG_FIELDS
            if unknown:
                raise GraphFormatError(f"unknown backend fields {sorted(unknown)}")
            fields = dict(entry)
            if fields.get("ops") is not None:
                fields["ops"] = frozenset(fields["ops"])
            specs.append(BackendSpec(**fields))
        return specs
    except GraphFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphFormatError(f"invalid backend catalog: {exc}") from None


def catalog_to_doc(catalog) -> dict:
    backends = []
    for spec in catalog:
        entry = {"name": spec.name, "kind": spec.kind, "registers": spec.registers,
                 "simd_width": spec.simd_width, "schedule_cost": spec.schedule_cost,
                 "executable": spec.executable}
        if spec.kind == "cpu":
            entry.update(frequency=spec.frequency, fp16=spec.fp16)
        else:
            entry["flops"] = spec.flops
        if spec.ops is not None:
            entry["ops"] = sorted(spec.ops)
        backends.append(entry)
    return {"backends": backends}


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise GraphFormatError(f"cannot read {path}: {exc}") from None


def dump_json(doc, path=None) -> str:
    text = json.dumps(doc, indent=1) + "\n"
    if path is not None and str(path) != "-":
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_graph(path) -> Graph:
    return graph_from_doc(load_json(path))


def load_tensors(path) -> dict[str, np.ndarray]:
    return tensors_from_doc(load_json(path))


def load_catalog(path) -> list[BackendSpec]:
    return catalog_from_doc(load_json(path))
