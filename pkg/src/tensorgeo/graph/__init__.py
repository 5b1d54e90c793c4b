"""Graph IR, passes and the session/module executors."""

from .execute import evaluate, run_operator
from .ir import (
    ATOMIC,
    COMPOSITE,
    CONTROL_FLOW,
    TRANSFORM,
    Graph,
    GraphBuilder,
    Operator,
    TensorDesc,
    category_of,
)
from .modules import ControlModule, ModulePlan, SessionModule, module_run, module_split
from .order import topo_order
from .passes import geometric_pass
from .registry import OperatorRegistry, WorkloadReport, workload_report
from .session import Session, SessionPlan, graph_workloads, plan_session, session_run
from .shapes import shape_inference

__all__ = [
    "ATOMIC", "COMPOSITE", "CONTROL_FLOW", "TRANSFORM", "ControlModule", "Graph", "GraphBuilder",
    "ModulePlan", "Operator", "OperatorRegistry", "Session", "SessionModule", "SessionPlan",
    "TensorDesc", "WorkloadReport", "category_of", "evaluate", "geometric_pass", "graph_workloads",
    "module_run", "module_split", "plan_session", "run_operator", "session_run", "shape_inference",
    "topo_order", "workload_report",
]
