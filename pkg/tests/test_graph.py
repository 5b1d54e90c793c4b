import numpy as np
import pytest
from conftest import FIXTURES
from graphgen import random_control_graph, random_graph
from oracles import interpret, rel_error

from tensorgeo import io
from tensorgeo.errors import CycleError, GraphFormatError, ModeError, RunawayLoopError, ShapeError
from tensorgeo.graph import (
    ATOMIC,
    COMPOSITE,
    CONTROL_FLOW,
    TRANSFORM,
    ControlModule,
    Graph,
    GraphBuilder,
    Operator,
    OperatorRegistry,
    Session,
    SessionModule,
    TensorDesc,
    category_of,
    evaluate,
    geometric_pass,
    module_run,
    module_split,
    plan_session,
    session_run,
    shape_inference,
    topo_order,
    workload_report,
)
from tensorgeo.search import REFERENCE_CPU, TILED_CPU

GRAPH_FIXTURES = ("identity", "mlp", "if_graph", "linreg")


def op_graph(edges: dict[str, list[str]], ids=None) -> Graph:
    """Graph of relu/add ops; ``edges`` maps op id to the op ids it reads."""
    tensors = {"x": TensorDesc("x", (2,))}
    ops = []
    for name in ids or edges:
        ins = [f"{p}_out" for p in edges[name]] or ["x"]
        kind = "relu" if len(ins) == 1 else "add"
        ops.append(Operator(name, kind, ins[:2], [f"{name}_out"]))
        tensors[f"{name}_out"] = TensorDesc(f"{name}_out")
    return Graph(tensors, ops, ["x"], [f"{ops[-1].id}_out"])


def producers_first(graph: Graph, order) -> bool:
    made = set(graph.inputs) | set(graph.constants())
    for op in order:
        if any(t not in made for t in op.inputs):
            return False
        made |= set(op.outputs)
    return True


def test_categories():
    assert category_of("transpose") == TRANSFORM
    assert category_of("if") == category_of("while") == CONTROL_FLOW
    assert category_of("elu") == COMPOSITE
    assert category_of("raster") == category_of("matmul") == ATOMIC


def test_validate_rejects_two_producers():
    b = GraphBuilder()
    x = b.input("x", (2,))
    b.op("relu", [x], outputs=["y"])
    b.op("neg", [x], outputs=["y"])
    with pytest.raises(GraphFormatError):
        b.build(["y"]).validate()


# topo_order

def test_topo_single_op():
    g = op_graph({"a": []})
    assert [op.id for op in topo_order(g)] == ["a"]


def test_topo_diamond():
    g = op_graph({"d": ["b", "c"], "c": ["a"], "b": ["a"], "a": []})
    order = [op.id for op in topo_order(g)]
    assert order[0] == "a" and order[-1] == "d"
    assert order == ["a", "b", "c", "d"]  # ties by id


def test_topo_random_dag_of_50(rng):
    names = [f"n{i:02d}" for i in range(50)]
    edges = {n: [names[j] for j in rng.choice(i, size=min(i, int(rng.integers(0, 3))), replace=False)]
             for i, n in enumerate(names)}
    shuffled = [names[i] for i in rng.permutation(50)]
    g = op_graph(edges, shuffled)
    order = topo_order(g)
    assert len(order) == 50 and producers_first(g, order)
    assert [op.id for op in order] == [op.id for op in topo_order(g)]


def test_topo_cycle():
    tensors = {t: TensorDesc(t) for t in ("x", "a", "b")}
    ops = [Operator("p", "add", ["x", "b"], ["a"]), Operator("q", "relu", ["a"], ["b"])]
    with pytest.raises(CycleError):
        topo_order(Graph(tensors, ops, ["x"], ["b"]))


# shape inference

def test_shape_examples():
    b = GraphBuilder()
    x, w = b.input("x", (3, 4)), b.input("w", (4, 5))
    y = b.op("matmul", [x, w])
    img, k = b.input("img"), b.input("k")
    z = b.op("conv2d", [img, k], {"stride": 1, "pad": 1})
    u, v = b.input("u", (2, 3)), b.input("v", (2, 5))
    c = b.op("concat", [u, v], {"axis": 1})
    shapes = shape_inference(b.build([y, z, c]), {"img": (1, 3, 8, 8), "k": (4, 3, 3, 3)})
    assert shapes[y] == (3, 5) and shapes[z] == (1, 4, 8, 8) and shapes[c] == (2, 8)


def test_shape_errors():
    b = GraphBuilder()
    x, w = b.input("x", (3, 4)), b.input("w", (5, 5))
    with pytest.raises(ShapeError):
        shape_inference(b.build([b.op("matmul", [x, w])]))
    b = GraphBuilder()
    unknown = b.input("u")
    with pytest.raises(ShapeError):
        shape_inference(b.build([b.op("relu", [unknown])]), {})


def test_if_branch_shape_mismatch():
    tb, eb = GraphBuilder("t/"), GraphBuilder("e/")
    then_g = tb.build([tb.op("relu", [tb.input("t/x", (2, 2))])])
    ex = eb.input("e/x", (2, 2))
    else_g = eb.build([eb.op("slice", [ex], {"begin": (0, 0), "size": (1, 2)})])
    b = GraphBuilder()
    out = b.op("if", [b.input("c", (1,)), b.input("x", (2, 2))], subgraphs={"then": then_g, "else": else_g})
    with pytest.raises(ShapeError):
        shape_inference(b.build([out]))


# geometric pass

def test_single_transpose_becomes_one_raster():
    b = GraphBuilder()
    y = b.op("transpose", [b.input("x", (2, 3))], {"perm": (1, 0)})
    out = geometric_pass(b.build([y]))
    assert [op.kind for op in out.operators] == ["raster"]


def test_transpose_pair_collapses_to_identity(rng):
    b = GraphBuilder()
    x = b.input("x", (3, 4))
    y = b.op("transpose", [b.op("transpose", [x], {"perm": (1, 0)})], {"perm": (1, 0)})
    g = b.build([y])
    out = geometric_pass(g)
    assert [op.kind for op in out.operators] == ["raster"]
    feed = {"x": rng.standard_normal((3, 4)).astype(np.float32)}
    assert evaluate(out, feed)[y].tobytes() == evaluate(g, feed)[y].tobytes() == feed["x"].tobytes()


def test_elu_lowering_census():
    b = GraphBuilder()
    y = b.op("elu", [b.op("permute", [b.input("x", (2, 3))], {"perm": (1, 0)})])
    census = geometric_pass(b.build([y])).census()
    assert census[TRANSFORM] == census[COMPOSITE] == 0 and census[ATOMIC] > 0


@pytest.mark.parametrize("name", GRAPH_FIXTURES)
def test_geometric_pass_idempotent_on_fixtures(name):
    once = geometric_pass(io.load_graph(FIXTURES / f"{name}.json"))
    twice = geometric_pass(once)
    assert io.graph_to_doc(once) == io.graph_to_doc(twice)


def test_geometric_pass_idempotent_and_sound_on_random_graphs(rng):
    for _ in range(40):
        g, feeds = random_graph(rng)
        once = geometric_pass(g)
        assert io.graph_to_doc(geometric_pass(once)) == io.graph_to_doc(once)
        assert once.census()[TRANSFORM] == once.census()[COMPOSITE] == 0
        for t in g.outputs:
            assert rel_error(evaluate(once, feeds)[t], interpret(g, feeds)[t]) < 1e-5


# session mode

def test_identity_session():
    g = io.load_graph(FIXTURES / "identity.json")
    x = io.load_tensors(FIXTURES / "identity_inputs.json")["x"]
    out = session_run(g, {"x": x})
    assert out["x"].tobytes() == x.tobytes()


def test_mlp_session_matches_interpreter():
    g = io.load_graph(FIXTURES / "mlp.json")
    feeds = io.load_tensors(FIXTURES / "mlp_inputs.json")
    want = interpret(g, feeds)["y"]
    for catalog in ([TILED_CPU], [REFERENCE_CPU], io.load_catalog(FIXTURES / "catalog4.json")):
        assert rel_error(session_run(g, feeds, catalog)["y"], want) < 1e-5


def test_duplicate_transposes_match_unmerged(rng):
    b = GraphBuilder()
    x = b.input("x", (3, 5))
    t1 = b.op("transpose", [x], {"perm": (1, 0)})
    t2 = b.op("transpose", [x], {"perm": (1, 0)})
    y = b.op("mul", [t1, t2])
    g = b.build([y])
    lowered = geometric_pass(g)
    assert sum(op.kind == "raster" for op in lowered.operators) == 1
    feed = {"x": rng.standard_normal((3, 5)).astype(np.float32)}
    assert session_run(g, feed)[y].tobytes() == evaluate(g, feed)[y].tobytes()


def test_session_rejects_control_flow():
    g = io.load_graph(FIXTURES / "if_graph.json")
    with pytest.raises(ModeError):
        session_run(g, io.load_tensors(FIXTURES / "if_inputs.json"))


def test_session_reports_plan_and_peak_memory():
    g = io.load_graph(FIXTURES / "mlp.json")
    sess = Session(g, io.load_catalog(FIXTURES / "catalog4.json"))
    sess.run(io.load_tensors(FIXTURES / "mlp_inputs.json"))
    assert sess.plan.selected.name == "cpu-big-fp16"
    assert sess.plan.executed.executable and sess.plan.executed.name == "cpu-tiled"
    assert sess.peak_bytes >= 4 * 16 * 4


def test_plan_uses_cached_shapes():
    g = io.load_graph(FIXTURES / "mlp.json")
    plan = plan_session(g, {"x": (4, 8)})
    assert plan.shapes["y"] == (4, 3) and plan.selected.name in {"cpu-tiled", "cpu-reference"}


def test_random_graphs_every_backend(rng):
    catalogs = [[TILED_CPU], [REFERENCE_CPU], io.load_catalog(FIXTURES / "catalog4.json")]
    for i in range(200):
        g, feeds = random_graph(rng)
        want = interpret(g, feeds)
        got = session_run(g, feeds, catalogs[i % 3])
        for t in g.outputs:
            assert rel_error(got[t], want[t]) < 1e-5, (i, t)


# module mode

def test_flat_graph_is_one_module():
    plan = module_split(io.load_graph(FIXTURES / "mlp.json"))
    assert len(plan) == 1 and isinstance(plan[0], SessionModule)


def test_pre_if_post_is_three_modules():
    plan = module_split(io.load_graph(FIXTURES / "if_graph.json"))
    kinds = [type(m) for m in plan]
    assert kinds == [SessionModule, ControlModule, SessionModule]
    assert plan[1].op.kind == "if" and set(plan[1].bodies) == {"then", "else"}


def check_maximal(plan, graph) -> None:
    """No two session modules are adjacent; every operator appears once."""
    seen = []
    for prev, cur in zip(plan.modules, plan.modules[1:]):
        assert not (isinstance(prev, SessionModule) and isinstance(cur, SessionModule))
    for m in plan:
        if isinstance(m, SessionModule):
            assert not m.graph.has_control_flow()
            seen += [op.id for op in m.graph.operators]
        else:
            seen.append(m.op.id)
            for name, body in m.bodies.items():
                check_maximal(body, m.op.subgraphs[name])
    assert sorted(seen) == sorted(op.id for op in graph.operators)


def test_nested_split_is_recursive_and_maximal(rng):
    nested = 0
    for _ in range(30):
        g, _ = random_control_graph(rng)
        plan = module_split(g)
        check_maximal(plan, g)
        for m in plan:
            if isinstance(m, ControlModule) and m.op.kind == "if":
                inner = [x for x in m.bodies["then"] if isinstance(x, ControlModule)]
                nested += bool(inner)
    assert nested > 0


def test_if_module_picks_branch():
    g = io.load_graph(FIXTURES / "if_graph.json")
    feeds = io.load_tensors(FIXTURES / "if_inputs.json")
    plan = module_split(g)
    want_then = 2 * np.maximum(np.tanh(feeds["x"]), 0)
    np.testing.assert_allclose(module_run(plan, feeds)["y"], want_then, rtol=1e-6)
    feeds["flag"] = np.zeros(1, np.float32)
    np.testing.assert_allclose(module_run(plan, feeds)["y"], -2 * np.tanh(feeds["x"]), rtol=1e-6)


def counter_while(limit: int, cap: int | None = None) -> Graph:
    cb = GraphBuilder("c/")
    ci = cb.input("c/i", (1,))
    cond = cb.build([cb.op("relu", [cb.op("sub", [cb.const(np.full(1, limit)), ci])])])
    bb = GraphBuilder("b/")
    bi = bb.input("b/i", (1,))
    body = bb.build([bb.op("add", [bi, bb.const(np.ones(1))])])
    b = GraphBuilder()
    attrs = {} if cap is None else {"max_iterations": cap}
    out = b.op("while", [b.input("i", (1,))], attrs, subgraphs={"cond": cond, "body": body})
    return b.build([out])


def test_while_counts_to_three():
    g = counter_while(3)
    out = module_run(module_split(g), {"i": np.zeros(1)})
    assert out[g.outputs[0]].tolist() == [3.0]


def test_runaway_loop():
    g = counter_while(10**9, cap=50)
    with pytest.raises(RunawayLoopError):
        module_run(module_split(g), {"i": np.zeros(1)})


def test_default_cap_is_ten_thousand():
    g = counter_while(20_000)
    with pytest.raises(RunawayLoopError):
        module_run(module_split(g), {"i": np.zeros(1)})
    g = counter_while(10_000)
    assert module_run(module_split(g), {"i": np.zeros(1)})[g.outputs[0]].tolist() == [10_000.0]


def test_non_scalar_condition():
    g = io.load_graph(FIXTURES / "if_graph.json")
    for op in g.operators:
        if op.kind == "if":
            op.inputs[0] = "x"
    with pytest.raises(ShapeError):
        module_run(module_split(g), io.load_tensors(FIXTURES / "if_inputs.json"))


def test_module_run_equals_session_run_bitwise(rng):
    for _ in range(30):
        g, feeds = random_graph(rng)
        a, b = module_run(module_split(g), feeds), session_run(g, feeds)
        assert all(a[t].tobytes() == b[t].tobytes() for t in g.outputs)


def test_control_flow_graphs_match_interpreter(rng):
    for i in range(50):
        g, feeds = random_control_graph(rng)
        got = module_run(module_split(g), feeds)
        want = interpret(g, feeds)
        for t in g.outputs:
            assert rel_error(got[t], want[t]) < 1e-5, i


# workload report

def test_workload_report_examples():
    r = workload_report(OperatorRegistry(61, 45, 16, 2, 16))
    assert (r.naive, r.geometric, r.format_reduction()) == (1954, 1055, "46.0%")
    r = workload_report(OperatorRegistry(1, 0, 0, 0, 1))
    assert (r.naive, r.geometric) == (1, 2) and r.reduction < 0
    r = workload_report(OperatorRegistry(10, 10, 10, 2, 4))
    assert (r.naive, r.geometric) == (122, 66)
    assert workload_report(OperatorRegistry(0, 0, 0, 0, 1)).format_reduction() == "n/a"


def test_registry_rejects_negative_counts():
    with pytest.raises(ShapeError):
        OperatorRegistry(-1, 0, 0, 0, 1)
