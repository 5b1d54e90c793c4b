"""Semi-automatic backend search.

Every backend is costed as the sum over operators of the cheapest
algorithm's ``Q / P + S`` (multiply-accumulates over backend throughput plus
a per-launch scheduling cost), and the cheapest backend wins.  Matmul tile
sizes come from a small register-constrained minimisation of memory
traffic, solved by enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InfeasibleError, NoBackendError, SpecError, UnsupportedError
from .kernels.counting import q_count
from .kernels.elementwise import ELEMENTWISE_KINDS
from .kernels.variants import AlgorithmVariant

CPU = "cpu"
GPU = "gpu"


@dataclass(frozen=True)
class BackendSpec:
    """Description of a (possibly hypothetical) execution target.

    ``frequency`` is in GHz and ``fp16`` marks ARMv8.2-FP16 support; both only
    apply to CPUs.  ``flops`` only applies to GPUs.  ``ops`` optionally
    restricts the operator kinds the backend implements.
    """

    name: str
    kind: str
    registers: int = 16
    simd_width: int = 4
    frequency: float | None = None
    fp16: bool = False
    flops: float | None = None
    schedule_cost: float = 0.0
    executable: bool = False
    ops: frozenset[str] | None = None

    def __post_init__(self):
        if self.kind not in (CPU, GPU):
            raise SpecError(f"{self.name}: kind must be 'cpu' or 'gpu', got {self.kind!r}")
        if self.registers < 3:
            raise SpecError(f"{self.name}: at least 3 registers are required")
        if self.simd_width < 1:
            raise SpecError(f"{self.name}: simd_width must be positive")
        if self.schedule_cost < 0:
            raise SpecError(f"{self.name}: schedule_cost must be >= 0")
        if self.kind == CPU:
            if not self.frequency or self.frequency <= 0:
                raise SpecError(f"{self.name}: cpu backends need a positive frequency")
            if self.schedule_cost != 0:
                raise SpecError(f"{self.name}: cpu backends have zero scheduling cost")
        elif not self.flops or self.flops <= 0:
            raise SpecError(f"{self.name}: gpu backends need positive flops")
        if self.ops is not None:
            object.__setattr__(self, "ops", frozenset(self.ops))

    def supports(self, kind: str) -> bool:
        return self.ops is None or kind in self.ops


REFERENCE_CPU = BackendSpec("cpu-reference", CPU, registers=3, simd_width=1, frequency=2.0, executable=True)
TILED_CPU = BackendSpec("cpu-tiled", CPU, registers=16, simd_width=4, frequency=2.0, executable=True)
DEFAULT_CATALOG = (TILED_CPU, REFERENCE_CPU)


@dataclass(frozen=True)
class Workload:
    """One operator as the cost model sees it: a kind and its sizes."""

    kind: str
    sizes: tuple[int, ...]
    label: str = ""


@dataclass(frozen=True)
class OpCost:
    label: str
    kind: str
    variant: AlgorithmVariant
    q: int
    cost: float


@dataclass
class CostBreakdown:
    backend: str
    entries: list[OpCost] = field(default_factory=list)

    @property
    def total(self) -> float:
        return sum(e.cost for e in self.entries)

    def variants(self) -> dict[str, AlgorithmVariant]:
        return {e.label: e.variant for e in self.entries}


def backend_power(spec: BackendSpec) -> float:
    """Throughput estimate in operations per second."""
    if spec.kind == CPU:
        return (16 if spec.fp16 else 8) * spec.frequency * 1e9
    return float(spec.flops)


def tile_traffic(a: int, e: int, b: int, t_e: int, t_b: int) -> Fraction:
    """Memory reads/writes of a matmul blocked into ``t_e x t_b`` register tiles."""
    return Fraction(e, t_e) * Fraction(b, t_b) * (a * t_e + a * t_b + t_e * t_b)


def optimize_tile(a: int, e: int, b: int, n_r: int) -> tuple[int, int]:
    """Register tile ``(t_e, t_b)`` with minimal traffic subject to
    ``t_e * t_b + t_e + t_b <= n_r``.  Ties go to smaller ``t_e``, then ``t_b``.
    """
    if min(a, e, b) < 1:
        raise InfeasibleError(f"matrix dims must be >= 1, got {(a, e, b)}")
    if n_r < 3:
        raise InfeasibleError(f"{n_r} registers cannot hold even a 1x1 tile")
    best, best_cost = None, None
    for t_e in range(1, min(e, n_r) + 1):
        if 2 * t_e + 1 > n_r:
            break
        for t_b in range(1, min(b, n_r) + 1):
            if t_e * t_b + t_e + t_b > n_r:
                break
            cost = tile_traffic(a, e, b, t_e, t_b)
            if best_cost is None or cost < best_cost:
                best, best_cost = (t_e, t_b), cost
    return best


def algorithms(kind: str, sizes: Sequence[int], spec: BackendSpec) -> list[AlgorithmVariant]:
    """Candidate algorithms, already carrying their best parameters.

    Earlier entries win cost ties.
    """
    if not spec.supports(kind):
        return []
    if kind == "matmul":
        if spec.kind == GPU:
            return [AlgorithmVariant.direct()]
        a, e, b = sizes
        out = [AlgorithmVariant.tiled(*optimize_tile(a, e, b, spec.registers))]
        cutoff = 1
        while cutoff < min(a, e, b):
            out.append(AlgorithmVariant.strassen(cutoff))
            cutoff *= 2
        out.append(AlgorithmVariant.direct())
        return out
    if kind == "conv2d":
        kh, kw, stride = sizes[5], sizes[6], sizes[7]
        if (kh, kw, stride) == (3, 3, 1):
            return [AlgorithmVariant.direct(), AlgorithmVariant.winograd(2), AlgorithmVariant.winograd(6)]
        return [AlgorithmVariant.direct()]
    if kind in ELEMENTWISE_KINDS or kind in ("reduce_sum", "raster"):
        return [AlgorithmVariant.direct()]
    return []


def op_cost(kind: str, sizes: Sequence[int], spec: BackendSpec, label: str = "") -> OpCost:
    """Cheapest ``Q / P + S`` over the algorithms available for ``kind`` on ``spec``."""
    sizes = tuple(int(s) for s in sizes)
    candidates = algorithms(kind, sizes, spec)
    if not candidates:
        raise UnsupportedError(f"backend {spec.name!r} cannot run {kind}")
    power = backend_power(spec)
    best = None
    for variant in candidates:
        q = q_count(kind, variant, sizes)
        if kind in ELEMENTWISE_KINDS:
            q = math.ceil(q / spec.simd_width)
        cost = q / power + spec.schedule_cost
        if best is None or cost < best.cost:
            best = OpCost(label or kind, kind, variant, q, cost)
    return best


def graph_cost(workloads: Iterable[Workload], spec: BackendSpec) -> CostBreakdown:
    breakdown = CostBreakdown(spec.name)
    for i, w in enumerate(workloads):
        breakdown.entries.append(op_cost(w.kind, w.sizes, spec, w.label or f"{w.kind}#{i}"))
    return breakdown


def rank_backends(workloads: Sequence[Workload], catalog: Sequence[BackendSpec]):
    """``(spec, breakdown)`` per catalog entry; breakdown is None when unsupported."""
    out = []
    for spec in catalog:
        try:
            out.append((spec, graph_cost(workloads, spec)))
        except UnsupportedError:
            out.append((spec, None))
    return out


def select_backend(workloads: Sequence[Workload], catalog: Sequence[BackendSpec]):
    """Return ``(spec, breakdown)`` of the cheapest backend; ties keep catalog order."""
    if not catalog:
        raise NoBackendError("backend catalog is empty")
    best = None
    for spec, breakdown in rank_backends(list(workloads), catalog):
        if breakdown is not None and (best is None or breakdown.total < best[1].total):
            best = (spec, breakdown)
    if best is None:
        raise NoBackendError("no backend in the catalog supports every operator")
    return best
