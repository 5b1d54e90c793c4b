"""Executable kernels for atomic operators."""

from .conv import conv2d, conv2d_shape, winograd_matrices
from .counting import q_count, strassen_count
from .elementwise import BINARY, ELEMENTWISE_KINDS, UNARY, elementwise, reduce_sum
from .matmul import matmul, matmul_shape
from .variants import DIRECT, AlgorithmVariant, MulCounter

__all__ = [
    "AlgorithmVariant", "BINARY", "DIRECT", "ELEMENTWISE_KINDS", "MulCounter", "UNARY",
    "conv2d", "conv2d_shape", "elementwise", "lower_composite", "matmul", "matmul_shape",
    "q_count", "reduce_sum", "strassen_count", "winograd_matrices",
]


def __getattr__(name):
    # composite lowering builds graphs, so import it lazily to avoid a cycle
    if name == "lower_composite":
        from .composite import lower_composite
        return lower_composite
    raise AttributeError(name)
