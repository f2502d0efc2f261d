from __future__ import annotations

import json
import random
import time

import pytest

from conftest import chain_source, random_program_source
from modstan.graphs import (
    CapExceeded,
    export_graph,
    limit,
    model_graph,
    model_graph_nodes_only,
    model_neighbors,
    naive_model_graph,
)
from modstan.parser import parse
from modstan.program import ModularProgram, Selection


def graph_key(g):
    return (g.node_ids(), [(e.key(), e.hole, e.impls) for e in g.edges])


# -- naive oracle ---------------------------------------------------------------


def test_naive_counts_three_hole(normal_program):
    g = naive_model_graph(normal_program)
    assert len(g.nodes) == 6 and len(g.edges) == 9


def test_naive_no_hole_program():
    mp = ModularProgram(parse("data {\n  int N;\n}\nmodel {\n  target += 1;\n}\n"))
    g = naive_model_graph(mp)
    assert len(g.nodes) == 1 and len(g.edges) == 0


def test_naive_single_hole_complete_graph():
    src = "model {\n  target += H();\n}\n" + "".join(
        f'module "i{k}" H() {{\n  return {k};\n}}\n' for k in range(4)
    )
    g = naive_model_graph(ModularProgram(parse(src)))
    assert len(g.nodes) == 4 and len(g.edges) == 6


def test_naive_cap():
    with pytest.raises(CapExceeded):
        naive_model_graph(ModularProgram(parse(chain_source(40))), cap=10**6)


# -- efficient algorithm -----------------------------------------------------------


def test_expand_equals_naive_on_fixtures(normal_program, golf_program, birthday_program):
    for mp in (normal_program, golf_program, birthday_program):
        assert graph_key(model_graph(mp)) == graph_key(naive_model_graph(mp))


def test_every_edge_has_exactly_one_sibling_pair(birthday_program):
    from modstan.program import sibling_count

    g = model_graph(birthday_program)
    for e in g.edges:
        assert sibling_count(e.a, e.b) == 1


def test_birthday_is_120_nodes(birthday_program):
    assert len(model_graph_nodes_only(birthday_program)) == 120


def test_chain_nodes(normal_program):
    for depth in (3, 7):
        mp = ModularProgram(parse(chain_source(depth)))
        ns = model_graph_nodes_only(mp)
        assert len(ns) == depth + 1
        assert graph_key(model_graph(mp)) == graph_key(naive_model_graph(mp))


def test_nodes_only_agrees_with_full(normal_program, birthday_program):
    for mp in (normal_program, birthday_program):
        assert [s.canonical() for s in model_graph_nodes_only(mp).selections()] == model_graph(mp).node_ids()


def test_diamond_shapes():
    # one hole reached by two implementations (hole-branch), and one
    # implementation containing two holes that share a child (impl-branch)
    hole_branch = (
        "model {\n  target += A();\n}\n"
        'module "a1" A() {\n  return C();\n}\n'
        'module "a2" A() {\n  return C() + 1;\n}\n'
        'module "c1" C() {\n  return 1;\n}\n'
        'module "c2" C() {\n  return 2;\n}\n'
    )
    impl_branch = (
        "model {\n  target += A();\n}\n"
        'module "a" A() {\n  return B() + C();\n}\n'
        'module "b1" B() {\n  return D();\n}\n'
        'module "b2" B() {\n  return 0;\n}\n'
        'module "c1" C() {\n  return D();\n}\n'
        'module "c2" C() {\n  return 0;\n}\n'
        'module "d1" D() {\n  return 1;\n}\n'
        'module "d2" D() {\n  return 2;\n}\n'
    )
    for src in (hole_branch, impl_branch):
        mp = ModularProgram(parse(src))
        assert graph_key(model_graph(mp)) == graph_key(naive_model_graph(mp))


# -- limit ---------------------------------------------------------------------------


def test_limit_restricts_one_hole(normal_program):
    lim = limit(normal_program, {"Mean": "normal"})
    assert lim.hole_impls("Mean") == ("normal",)
    assert lim.hole_impls("Stddev") == ("lognormal", "standard")


def test_limit_empty_selection_is_identity(normal_program):
    lim = limit(normal_program, {})
    for h in normal_program.all_holes():
        assert lim.hole_impls(h) == normal_program.hole_impls(h)


def test_limit_full_selection_pins_single_model(normal_program):
    sel = {"Mean": "normal", "Stddev": "lognormal", "StddevInformative": "yes"}
    nodes = model_graph_nodes_only(limit(normal_program, sel)).selections()
    assert len(nodes) == 1 and dict(nodes[0]) == sel


# -- neighbors --------------------------------------------------------------------------


def test_neighbors_example(normal_program):
    nbrs = model_neighbors(normal_program, Selection({"Mean": "standard", "Stddev": "standard"}))
    assert {n.canonical() for n in nbrs} == {
        "Mean:normal,Stddev:standard",
        "Mean:standard,Stddev:lognormal,StddevInformative:yes",
        "Mean:standard,Stddev:lognormal,StddevInformative:no",
    }


def test_neighbors_single_hole_k_minus_one():
    src = "model {\n  target += H();\n}\n" + "".join(
        f'module "i{k}" H() {{\n  return {k};\n}}\n' for k in range(5)
    )
    mp = ModularProgram(parse(src))
    nbrs = model_neighbors(mp, Selection({"H": "i0"}))
    assert len(nbrs) == 4


def test_neighbors_equal_full_graph_adjacency_random():
    rng = random.Random(777)
    for _ in range(25):
        mp = ModularProgram(parse(random_program_source(rng)))
        g = naive_model_graph(mp)
        for node in g.nodes:
            assert set(model_neighbors(mp, node)) == g.adjacency(node)


# -- export -----------------------------------------------------------------------------


def test_export_single_node_graph():
    mp = ModularProgram(parse("data {\n  int N;\n}\nmodel {\n  target += 1;\n}\n"))
    g = model_graph(mp)
    dot = export_graph(g, "dot")
    assert dot.count('";') == 1 and "--" not in dot


def test_export_three_hole_graph(normal_program):
    g = model_graph(normal_program)
    dot = export_graph(g, "dot")
    assert dot.count("--") == 9
    data = json.loads(export_graph(g, "json"))
    assert len(data["nodes"]) == 6 and len(data["edges"]) == 9
    assert {"hole", "impls", "a", "b"} <= set(data["edges"][0])


def test_export_json_round_trips(normal_program):
    g = model_graph(normal_program)
    data = json.loads(g.to_json())
    ids = {n["id"] for n in data["nodes"]}
    for e in data["edges"]:
        assert e["a"] in ids and e["b"] in ids
    rebuilt = {n["id"]: {b["hole"]: b["impl"] for b in n["selection"]} for n in data["nodes"]}
    for node in g.nodes:
        assert rebuilt[node.canonical()] == dict(node)


def test_export_unknown_format(normal_program):
    with pytest.raises(ValueError):
        export_graph(model_graph(normal_program), "yaml")


# -- scaling sanity (the strict ratios live in the acceptance suite) ----------------------


def test_chain_scales_roughly_linearly():
    mp = ModularProgram(parse(chain_source(400)))
    t0 = time.perf_counter()
    assert len(model_graph_nodes_only(mp)) == 401
    assert time.perf_counter() - t0 < 1.0


def test_prefix_invariant_every_prefix_extends_to_a_node():
    rng = random.Random(2024)
    for _ in range(15):
        mp = ModularProgram(parse(random_program_source(rng)))
        final = [dict(n) for n in naive_model_graph(mp).nodes]
        steps: list[tuple[str, list[dict]]] = []

        def observer(hole, prefixes):
            steps.append((hole, prefixes))

        model_graph(mp, observer=observer)
        for hole, prefixes in steps:
            for prefix in prefixes:
                assert any(
                    all(node.get(h) == i for h, i in prefix.items()) for node in final
                ), f"prefix {prefix} after visiting {hole} extends to no model"


def test_wide_hypercube_counts():
    # K independent binary holes: 2^K nodes, K * 2^(K-1) edges
    K = 7
    src = "model {\n  target += " + " + ".join(f"W{k}()" for k in range(K)) + ";\n}\n"
    for k in range(K):
        src += f'module "a" W{k}() {{\n  return 0;\n}}\nmodule "b" W{k}() {{\n  return 1;\n}}\n'
    mp = ModularProgram(parse(src))
    g = model_graph(mp)
    assert len(g.nodes) == 2**K
    assert len(g.edges) == K * 2 ** (K - 1)
