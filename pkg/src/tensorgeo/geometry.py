"""Raster operator: data movement described by linear coordinate-to-address maps.

A :class:`Region` iterates a box of coordinates and, for every coordinate,
copies one element from a source buffer to the destination buffer.  Both
addresses are affine in the coordinate (:class:`View`).  Every transform
operator (transpose, slice, concat, reshape, ...) decomposes into one
:class:`RasterOp`, and chains of rasters can be fused by composing their
maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import OverlapError, RegionBoundsError, ShapeError, TransformError
from .tensor import as_array

TRANSFORM_KINDS = ("transpose", "permute", "slice", "concat", "reshape", "broadcast")


def _row_major(shape: Sequence[int]) -> tuple[int, ...]:
    # like default_strides, but rank-0 shapes are allowed
    strides = [1] * len(shape)
    for k in range(len(shape) - 2, -1, -1):
        strides[k] = strides[k + 1] * shape[k + 1]
    return tuple(strides)


@dataclass(frozen=True)
class View:
    offset: int
    strides: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))

    def indices(self, size: Sequence[int]) -> np.ndarray:
        """Element index for every coordinate of ``size``, as an int64 array of that shape."""
        idx = np.full(tuple(size), self.offset, dtype=np.int64)
        for axis, (extent, stride) in enumerate(zip(size, self.strides)):
            if stride and extent > 1:
                shape = [1] * len(size)
                shape[axis] = extent
                idx = idx + (np.arange(extent, dtype=np.int64) * stride).reshape(shape)
        return idx


@dataclass(frozen=True)
class Region:
    """One box of coordinates moved from source ``src`` into the destination."""

    src: int
    size: tuple[int, ...]
    src_view: View
    dst_view: View

    def __post_init__(self):
        size = tuple(int(d) for d in self.size)
        if any(d < 1 for d in size):
            raise ShapeError(f"region extents must be >= 1, got {size}")
        if len(self.src_view.strides) != len(size) or len(self.dst_view.strides) != len(size):
            raise ShapeError("view strides must match the region rank")
        object.__setattr__(self, "size", size)

    @property
    def count(self) -> int:
        return math.prod(self.size)

    def normalized(self) -> Region:
        """Same movement with strides of extent-1 axes set to zero."""
        def norm(view):
            return View(view.offset, tuple(0 if d == 1 else s for d, s in zip(self.size, view.strides)))

        return replace(self, src_view=norm(self.src_view), dst_view=norm(self.dst_view))


@dataclass(frozen=True)
class RasterOp:
    regions: tuple[Region, ...]
    out_shape: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "out_shape", tuple(int(d) for d in self.out_shape))

    @property
    def num_sources(self) -> int:
        return 1 + max((r.src for r in self.regions), default=-1)

    @property
    def moved_elements(self) -> int:
        return sum(r.count for r in self.regions)

    def canonical(self) -> RasterOp:
        return RasterOp(tuple(r.normalized() for r in self.regions), self.out_shape)


def _checked_indices(view: View, size, limit: int, what: str) -> np.ndarray:
    idx = view.indices(size)
    if idx.size and (idx.min() < 0 or idx.max() >= limit):
        raise RegionBoundsError(
            f"{what} view {view} over range {size} leaves buffer of {limit} elements"
        )
    return idx


def raster_execute(op: RasterOp, sources: Sequence, validate: bool = False) -> np.ndarray:
    """Run the movement described by ``op`` and return the destination tensor.

    Destination elements written by no region are zero.  With ``validate``
    the regions are also checked for overlapping writes.
    """
    if len(sources) < op.num_sources:
        raise ShapeError(f"raster needs {op.num_sources} sources, got {len(sources)}")
    flat_sources = [as_array(s).reshape(-1) for s in sources]
    out = np.zeros(math.prod(op.out_shape), dtype=np.float32)
    written = []
    for region in op.regions:
        src = flat_sources[region.src]
        si = _checked_indices(region.src_view, region.size, src.size, "source")
        di = _checked_indices(region.dst_view, region.size, out.size, "destination")
        out[di] = src[si]
        if validate:
            written.append(di.reshape(-1))
    if validate and written:
        allw = np.concatenate(written)
        if np.unique(allw).size != allw.size:
            raise OverlapError("raster regions write the same destination element twice")
    return out.reshape(op.out_shape)


# --------------------------------------------------------------------------
# decomposition of transform operators

def _norm_axis(axis: int, rank: int) -> int:
    if not -rank <= axis < rank:
        raise TransformError(f"axis {axis} out of range for rank {rank}")
    return axis % rank


def _permute(shape, perm) -> RasterOp:
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(len(shape))):
        raise TransformError(f"{perm} is not a permutation of {len(shape)} axes")
    in_strides = _row_major(shape)
    out_shape = tuple(shape[p] for p in perm)
    region = Region(0, out_shape, View(0, tuple(in_strides[p] for p in perm)),
                    View(0, _row_major(out_shape)))
    return RasterOp((region,), out_shape)


def _slice(shape, begin, size) -> RasterOp:
    begin = tuple(int(b) for b in begin)
    size = tuple(int(s) for s in size)
    if len(begin) != len(shape) or len(size) != len(shape):
        raise TransformError("slice begin/size must have one entry per axis")
    size = tuple(d - b if s == -1 else s for d, b, s in zip(shape, begin, size))
    for d, b, s in zip(shape, begin, size):
        if b < 0 or s < 1 or b + s > d:
            raise TransformError(f"slice begin={begin} size={size} outside shape {shape}")
    strides = _row_major(shape)
    offset = sum(b * s for b, s in zip(begin, strides))
    region = Region(0, size, View(offset, strides), View(0, _row_major(size)))
    return RasterOp((region,), size)


def _concat(shapes, axis) -> RasterOp:
    if not shapes:
        raise TransformError("concat needs at least one input")
    rank = len(shapes[0])
    if rank == 0:
        raise TransformError("cannot concatenate scalars")
    axis = _norm_axis(axis, rank)
    for s in shapes:
        if len(s) != rank or any(a != b for k, (a, b) in enumerate(zip(s, shapes[0])) if k != axis):
            raise TransformError(f"concat inputs disagree off axis {axis}: {shapes}")
    out_shape = list(shapes[0])
    out_shape[axis] = sum(s[axis] for s in shapes)
    out_shape = tuple(out_shape)
    out_strides = _row_major(out_shape)
    regions, start = [], 0
    for i, s in enumerate(shapes):
        regions.append(Region(i, s, View(0, _row_major(s)), View(start * out_strides[axis], out_strides)))
        start += s[axis]
    return RasterOp(tuple(regions), out_shape)


def _reshape(shape, new_shape) -> RasterOp:
    new_shape = [int(d) for d in new_shape]
    total = math.prod(shape)
    if new_shape.count(-1) > 1:
        raise TransformError("reshape allows at most one -1")
    if -1 in new_shape:
        known = math.prod(d for d in new_shape if d != -1)
        if known == 0 or total % known:
            raise TransformError(f"cannot reshape {shape} into {new_shape}")
        new_shape[new_shape.index(-1)] = total // known
    new_shape = tuple(new_shape)
    if any(d < 1 for d in new_shape) or math.prod(new_shape) != total:
        raise TransformError(f"cannot reshape {shape} into {new_shape}")
    # engine tensors are always contiguous row-major, so a flat copy suffices
    region = Region(0, (total,), View(0, (1,)), View(0, (1,)))
    return RasterOp((region,), new_shape)


def _broadcast(shape, target) -> RasterOp:
    target = tuple(int(d) for d in target)
    if len(target) < len(shape):
        raise TransformError(f"cannot broadcast {shape} to lower rank {target}")
    lead = len(target) - len(shape)
    in_strides = _row_major(shape)
    strides = [0] * lead
    for d, t, s in zip(shape, target[lead:], in_strides):
        if d == t:
            strides.append(s)
        elif d == 1:
            strides.append(0)
        else:
            raise TransformError(f"cannot broadcast {shape} to {target}")
    if any(d < 1 for d in target):
        raise TransformError(f"invalid broadcast target {target}")
    region = Region(0, target, View(0, tuple(strides)), View(0, _row_major(target)))
    return RasterOp((region,), target)


def decompose_transform(kind: str, params: Mapping, input_shapes: Sequence[Sequence[int]]) -> RasterOp:
    """Express a transform operator as a single raster over its inputs.

    Region ``src`` indices refer to positions in ``input_shapes``.
    """
    shapes = [tuple(int(d) for d in s) for s in input_shapes]
    if kind != "concat" and len(shapes) != 1:
        raise TransformError(f"{kind} takes exactly one input, got {len(shapes)}")
    if kind == "transpose":
        perm = params.get("perm")
        if perm is None:
            perm = tuple(reversed(range(len(shapes[0]))))
        return _permute(shapes[0], perm)
    if kind == "permute":
        if "perm" not in params:
            raise TransformError("permute requires 'perm'")
        return _permute(shapes[0], params["perm"])
    if kind == "slice":
        try:
            return _slice(shapes[0], params["begin"], params["size"])
        except KeyError as exc:
            raise TransformError(f"slice requires {exc.args[0]!r}") from None
    if kind == "concat":
        return _concat(shapes, int(params.get("axis", 0)))
    if kind == "reshape":
        if "shape" not in params:
            raise TransformError("reshape requires 'shape'")
        return _reshape(shapes[0], params["shape"])
    if kind == "broadcast":
        if "shape" not in params:
            raise TransformError("broadcast requires 'shape'")
        return _broadcast(shapes[0], params["shape"])
    raise TransformError(f"unknown transform kind {kind!r}")


# --------------------------------------------------------------------------
# merging

def _fit_view(values: np.ndarray) -> View | None:
    """Affine view reproducing ``values`` (indexed by coordinate), or None."""
    size = values.shape
    base = int(values.reshape(-1)[0])
    strides = []
    for axis, extent in enumerate(size):
        if extent == 1:
            strides.append(0)
            continue
        unit = [0] * len(size)
        unit[axis] = 1
        strides.append(int(values[tuple(unit)]) - base)
    view = View(base, tuple(strides))
    return view if np.array_equal(view.indices(size), values) else None


def _full_cover(op: RasterOp) -> bool:
    return len(op.regions) == 1 and op.regions[0].count == math.prod(op.out_shape)


def _inverse_map(keys: np.ndarray, values: np.ndarray, n: int) -> np.ndarray | None:
    # table[keys] = values, provided keys are a permutation of range(n)
    keys = keys.reshape(-1)
    if keys.size != n or keys.min() < 0 or keys.max() >= n or np.unique(keys).size != n:
        return None
    table = np.empty(n, dtype=np.int64)
    table[keys] = values.reshape(-1)
    return table


def merge_vertical(producer: RasterOp, consumer: RasterOp) -> RasterOp | None:
    """Fuse ``consumer(producer(x))`` into one raster reading ``x`` directly.

    Only single-region, full-cover pairs are considered, and the fused map
    must be exactly affine; otherwise None is returned.
    """
    if not (_full_cover(producer) and _full_cover(consumer)) or consumer.num_sources != 1:
        return None
    p, c = producer.regions[0], consumer.regions[0]
    mid = math.prod(producer.out_shape)
    p_dst = p.dst_view.indices(p.size)
    p_src = p.src_view.indices(p.size)
    c_src = c.src_view.indices(c.size)
    if c_src.min() < 0 or c_src.max() >= mid:
        return None

    # walk the consumer's coordinates back through the producer
    to_source = _inverse_map(p_dst, p_src, mid)
    if to_source is not None:
        view = _fit_view(to_source[c_src])
        if view is not None:
            return RasterOp((Region(p.src, c.size, view, c.dst_view),), consumer.out_shape)

    # or push the producer's coordinates forward through the consumer
    to_dest = _inverse_map(c_src, c.dst_view.indices(c.size), mid)
    if to_dest is not None:
        view = _fit_view(to_dest[p_dst])
        if view is not None:
            return RasterOp((Region(p.src, p.size, p.src_view, view),), consumer.out_shape)
    return None


def merge_horizontal(a: RasterOp, b: RasterOp) -> RasterOp | None:
    """Return the shared raster if ``a`` and ``b`` perform the same movement."""
    return a if a.canonical() == b.canonical() else None


def transpose_raster(op: RasterOp, source_shape: Sequence[int]) -> RasterOp:
    """Raster moving data back from ``op``'s destination into its (single) source.

    For rasters whose reads are injective this is the adjoint movement.
    """
    if op.num_sources > 1:
        raise ShapeError("only single-source rasters can be transposed")
    regions = tuple(Region(0, r.size, r.dst_view, r.src_view) for r in op.regions)
    return RasterOp(regions, tuple(source_shape))
