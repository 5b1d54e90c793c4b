"""Command-line front end.

Exit codes: 0 success, 1 other engine error, 2 unreadable input or bad
flags, 3 control flow in session mode, 4 training diverged.
"""

from __future__ import annotations

import argparse
import sys

from . import io
from .autodiff import train
from .errors import DivergenceError, EngineError, GraphFormatError, ModeError, SpecError
from .graph.modules import SessionModule, module_run, module_split
from .graph.passes import geometric_pass
from .graph.registry import OperatorRegistry, workload_report
from .graph.session import Session, graph_workloads
from .graph.shapes import shape_inference
from .optim import OptimizerState
from .search import DEFAULT_CATALOG, backend_power, rank_backends, select_backend

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_MODE, EXIT_DIVERGED = 0, 1, 2, 3, 4


def _cost_table(breakdown, out):
    print(f"  {'operator':<24} {'kind':<12} {'variant':<16} {'Q':>14} {'cost(s)':>14}", file=out)
    for e in breakdown.entries:
        print(f"  {e.label:<24} {e.kind:<12} {str(e.variant):<16} {e.q:>14d} {e.cost:>14.6e}", file=out)
    print(f"  {'total':<24} {'':<12} {'':<16} {'':>14} {breakdown.total:>14.6e}", file=out)


def _print_plan(plan, out, indent=""):
    print(f"{indent}selected backend: {plan.selected.name} (C={plan.selected_cost.total:.6e} s)", file=out)
    if plan.executed is not plan.selected:
        print(f"{indent}executed backend: {plan.executed.name} "
              f"({plan.selected.name} is not executable)", file=out)
    _cost_table(plan.executed_cost, out)


def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    graph = io.load_graph(args.graph)
    inputs = io.load_tensors(args.inputs) if args.inputs else {}
    catalog = io.load_catalog(args.catalog) if args.catalog else list(DEFAULT_CATALOG)
    if args.mode == "session":
        session = Session(graph, catalog, validate=args.validate)
        outputs = session.run(inputs)
        _print_plan(session.plan, out)
        print(f"peak intermediate memory: {session.peak_bytes} bytes", file=out)
    else:
        plan = module_split(graph)
        outputs = module_run(plan, inputs, catalog)
        print(f"modules: {len(plan)}", file=out)
        for i, module in enumerate(plan):
            if isinstance(module, SessionModule):
                sess = module.session(catalog)
                if sess.plan is not None:
                    print(f"module {i} (session):", file=out)
                    _print_plan(sess.plan, out, "  ")
            else:
                print(f"module {i} ({module.op.kind} {module.op.id})", file=out)
    text = io.dump_json(io.tensors_to_doc(outputs), args.output)
    if args.output in (None, "-"):
        out.write(text)
    return EXIT_OK


def cmd_search_report(args, out=None) -> int:
    out = out or sys.stdout
    graph = io.load_graph(args.graph)
    catalog = io.load_catalog(args.catalog) if args.catalog else list(DEFAULT_CATALOG)
    overrides = {k: v.shape for k, v in io.load_tensors(args.inputs).items()} if args.inputs else {}
    shapes = shape_inference(graph, overrides)
    lowered = geometric_pass(graph, shapes)
    workloads = graph_workloads(lowered, {**shapes, **lowered.shapes()})
    ranked = rank_backends(workloads, catalog)
    print(f"{'backend':<20} {'kind':<5} {'P(ops/s)':>12} {'S(s)':>12} {'C_ba(s)':>14}", file=out)
    for spec, breakdown in ranked:
        total = "unsupported" if breakdown is None else f"{breakdown.total:.6e}"
        print(f"{spec.name:<20} {spec.kind:<5} {backend_power(spec):>12.4e} "
              f"{spec.schedule_cost:>12.4e} {total:>14}", file=out)
    winner, _ = select_backend(workloads, catalog)
    for spec, breakdown in ranked:
        if breakdown is not None:
            print(f"\n{spec.name}:", file=out)
            _cost_table(breakdown, out)
    print(f"\nwinner: {winner.name}", file=out)
    return EXIT_OK


def cmd_workload(args, out=None) -> int:
    out = out or sys.stdout
    reg = OperatorRegistry(args.aop, args.top, args.cop, args.fop, args.backends)
    report = workload_report(reg)
    print(f"naive: {report.naive}", file=out)
    print(f"geometric: {report.geometric}", file=out)
    print(f"reduction: {report.format_reduction()}", file=out)
    return EXIT_OK


def cmd_train(args, out=None) -> int:
    out = out or sys.stdout
    graph = io.load_graph(args.graph)
    feeds = io.load_tensors(args.data)
    opt = OptimizerState(args.optimizer, args.lr, args.beta1, args.beta2, args.eps)
    params, losses = train(graph, feeds, opt, args.steps)
    if args.params_out:
        io.dump_json(io.tensors_to_doc(params), args.params_out)
    lines = "".join(f"{i} {loss:.9g}\n" for i, loss in enumerate(losses))
    if args.loss_out:
        with open(args.loss_out, "w", encoding="utf-8") as fh:
            fh.write(lines)
    print(f"steps: {len(losses)}", file=out)
    if losses:
        print(f"initial loss: {losses[0]:.9g}", file=out)
        print(f"final loss: {losses[-1]:.9g}", file=out)
    return EXIT_OK


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{value} is negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensorgeo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run inference on a graph")
    run.add_argument("graph")
    run.add_argument("--inputs", help="tensor document with the graph inputs")
    run.add_argument("--catalog", help="backend catalog document")
    run.add_argument("--mode", choices=("session", "module"), default="session")
    run.add_argument("-o", "--output", help="where to write the outputs (default: stdout)")
    run.add_argument("--validate", action="store_true", help="check rasters for overlapping writes")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("search-report", help="cost every backend for a graph")
    rep.add_argument("graph")
    rep.add_argument("--catalog")
    rep.add_argument("--inputs", help="override input shapes from a tensor document")
    rep.set_defaults(func=cmd_search_report)

    wl = sub.add_parser("workload", help="operator implementation workload with and without rasters")
    wl.add_argument("--aop", type=_non_negative, default=61, help="atomic operators")
    wl.add_argument("--top", type=_non_negative, default=45, help="transform operators")
    wl.add_argument("--cop", type=_non_negative, default=16, help="composite operators")
    wl.add_argument("--fop", type=_non_negative, default=2, help="control-flow operators")
    wl.add_argument("--backends", type=_non_negative, default=16)
    wl.set_defaults(func=cmd_workload)

    tr = sub.add_parser("train", help="train the trainable tensors of a graph")
    tr.add_argument("graph")
    tr.add_argument("--data", required=True, help="tensor document feeding the graph inputs")
    tr.add_argument("--optimizer", choices=("sgd", "adam"), default="sgd")
    tr.add_argument("--lr", type=float, default=0.01)
    tr.add_argument("--beta1", type=float, default=0.9)
    tr.add_argument("--beta2", type=float, default=0.999)
    tr.add_argument("--eps", type=float, default=1e-8)
    tr.add_argument("--steps", type=_non_negative, default=100)
    tr.add_argument("--params-out")
    tr.add_argument("--loss-out")
    tr.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphFormatError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ModeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
