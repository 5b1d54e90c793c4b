"""A small tensor compute engine built around a raster data-movement operator.

Transform and composite operators are decomposed into atomic operators plus
rasters, rasters are merged, and a cost model picks the backend and the
kernel algorithm for every operator.
"""

from .errors import EngineError
from .geometry import RasterOp, Region, View, decompose_transform, merge_horizontal, merge_vertical, raster_execute
from .graph import Graph, GraphBuilder, module_run, module_split, session_run
from .kernels import AlgorithmVariant
from .search import BackendSpec, select_backend
from .tensor import Tensor, default_strides, linear_offset, nc4hw4_pack, nc4hw4_unpack

__version__ = "0.1.0"

__all__ = [
    "AlgorithmVariant", "BackendSpec", "EngineError", "Graph", "GraphBuilder", "RasterOp", "Region",
    "Tensor", "View", "decompose_transform", "default_strides", "linear_offset", "merge_horizontal",
    "merge_vertical", "module_run", "module_split", "nc4hw4_pack", "nc4hw4_unpack", "raster_execute",
    "select_backend", "session_run",
]
