from __future__ import annotations

from dataclasses import dataclass

from ..errors import ShapeError


@dataclass(frozen=True)
class OperatorRegistry:
    """Operator counts per category plus the number of backends to support."""

    atomic: int = 61
    transform: int = 45
    composite: int = 16
    control_flow: int = 2
    backends: int = 16

    def __post_init__(self):
        for name in ("atomic", "transform", "composite", "control_flow", "backends"):
            if getattr(self, name) < 0:
                raise ShapeError(f"{name} count must be non-negative")


@dataclass(frozen=True)
class WorkloadReport:
    naive: int
    geometric: int
    reduction: float | None

    def format_reduction(self) -> str:
        return "n/a" if self.reduction is None else f"{100 * self.reduction:.1f}%"


def workload_report(r: OperatorRegistry) -> WorkloadReport:
    """Per-backend implementation effort with and without the raster operator.

    Without it every atomic, transform and composite operator is written for
    every backend; with it only the atomic operators plus raster are, and the
    transform and composite operators are written once.
    """
    naive = (r.atomic + r.transform + r.composite) * r.backends + r.control_flow
    geometric = (r.atomic + 1) * r.backends + r.transform + r.composite + r.control_flow
    reduction = None if naive == 0 else 1 - geometric / naive
    return WorkloadReport(naive, geometric, reduction)
