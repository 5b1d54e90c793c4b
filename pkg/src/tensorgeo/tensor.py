"""Dense float32 tensors, row-major address arithmetic and NC4HW4 packing.

Inside the engine a tensor value is simply a C-contiguous ``numpy.float32``
array.  :class:`Tensor` adds the layout tag for buffers whose memory order is
not plain row-major (currently only the channel-blocked NC4HW4 layout).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CoordinateError, ShapeError

PLAIN = "plain"
NC4HW4 = "nc4hw4"
LAYOUTS = (PLAIN, NC4HW4)

CHANNEL_PACK = 4


def default_strides(shape: Sequence[int]) -> tuple[int, ...]:
    """Row-major strides of ``shape``: each entry is the product of the dims after it.

    >>> default_strides((2, 4))
    (4, 1)
    """
    shape = tuple(int(d) for d in shape)
    if not shape:
        raise ShapeError("shape must have at least one dimension")
    if any(d < 1 for d in shape):
        raise ShapeError(f"every dimension must be >= 1, got {shape}")
    strides = [1] * len(shape)
    for k in range(len(shape) - 2, -1, -1):
        strides[k] = strides[k + 1] * shape[k + 1]
    return tuple(strides)


def linear_offset(strides: Sequence[int], offset: int, coord: Sequence[int]) -> int:
    """Element index ``offset + sum(strides[k] * coord[k])``."""
    if len(strides) != len(coord):
        raise CoordinateError(
            f"coordinate has {len(coord)} entries but view has {len(strides)} strides"
        )
    return int(offset) + sum(int(s) * int(c) for s, c in zip(strides, coord))


def as_array(value) -> np.ndarray:
    """Coerce ``value`` to a C-contiguous float32 array (copying only if needed)."""
    if isinstance(value, Tensor):
        if value.layout != PLAIN:
            raise ShapeError(f"expected a plain tensor, got layout {value.layout!r}")
        value = value.data
    # ascontiguousarray would promote 0-d scalars to shape (1,)
    out = np.asarray(value, dtype=np.float32)
    return out if out.flags.c_contiguous else np.ascontiguousarray(out)


@dataclass(frozen=True, eq=False)
class Tensor:
    """A float32 buffer with a logical shape and a memory layout tag.

    For ``nc4hw4`` tensors ``shape`` is the logical ``(N, C, H, W)`` shape
    while ``data`` holds the packed ``(N, ceil(C/4), H, W, 4)`` block.
    """

    data: np.ndarray
    shape: tuple[int, ...]
    layout: str = PLAIN

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ShapeError(f"unknown layout {self.layout!r}")
        shape = tuple(int(d) for d in self.shape)
        if not shape or any(d < 1 for d in shape):
            raise ShapeError(f"invalid tensor shape {shape}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.layout == PLAIN:
            expected = shape
        else:
            if len(shape) != 4:
                raise ShapeError("nc4hw4 tensors are rank 4")
            n, c, h, w = shape
            expected = (n, math.ceil(c / CHANNEL_PACK), h, w, CHANNEL_PACK)
        if data.size != math.prod(expected):
            raise ShapeError(
                f"buffer of {data.size} elements does not fit shape {shape} ({self.layout})"
            )
        data = data.reshape(expected)
        data.flags.writeable = False
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array) -> Tensor:
        array = np.asarray(array, dtype=np.float32)
        return cls(array, array.shape)

    @property
    def buffer(self) -> np.ndarray:
        """Flat view of the underlying storage."""
        return self.data.reshape(-1)

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        if self.layout == NC4HW4:
            return nc4hw4_unpack(self).data.copy()
        return self.data.copy()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, layout={self.layout!r})"


def nc4hw4_pack(t) -> Tensor:
    """Pack an ``(N, C, H, W)`` tensor into channel blocks of four.

    Element ``(n, c, h, w)`` moves to ``(n, c // 4, h, w, c % 4)``; channels
    past ``C`` in the last block are zero.
    """
    x = as_array(t)
    if x.ndim != 4:
        raise ShapeError(f"nc4hw4 packing needs a rank-4 tensor, got shape {x.shape}")
    n, c, h, w = x.shape
    blocks = math.ceil(c / CHANNEL_PACK)
    padded = np.zeros((n, blocks * CHANNEL_PACK, h, w), dtype=np.float32)
    padded[:, :c] = x
    packed = padded.reshape(n, blocks, CHANNEL_PACK, h, w).transpose(0, 1, 3, 4, 2)
    return Tensor(packed, (n, c, h, w), NC4HW4)


def nc4hw4_unpack(t: Tensor) -> Tensor:
    if not isinstance(t, Tensor) or t.layout != NC4HW4:
        raise ShapeError("nc4hw4_unpack expects a packed Tensor")
    n, c, h, w = t.shape
    blocks = t.data.shape[1]
    plain = t.data.transpose(0, 1, 4, 2, 3).reshape(n, blocks * CHANNEL_PACK, h, w)[:, :c]
    return Tensor(plain, (n, c, h, w))
