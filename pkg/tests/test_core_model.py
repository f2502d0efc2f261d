from __future__ import annotations

import json
import pytest
import random

from hypothesis import given, strategies as st

from conftest import random_program_source
from modstan.parser import parse
from modstan.program import ModularProgram, Selection, module_graph, siblings


def test_siblings_of_equal_selection_is_empty(normal_program):
    sel = Selection({"Mean": "normal", "Stddev": "standard"})
    assert siblings(sel, sel) == frozenset()


def test_siblings_shared_parent():
    assert siblings({"Mean": "standard"}, {"Mean": "normal"}) == {("Mean", "standard", "normal")}


def test_siblings_disjoint_parents():
    assert siblings({"Mean": "standard"}, {"Stddev": "standard"}) == frozenset()


def test_valid_selection_full(normal_program):
    rep = normal_program.valid_selection({"Mean": "normal", "Stddev": "lognormal", "StddevInformative": "yes"})
    assert rep.ok


def test_valid_selection_extra_impl(normal_program):
    rep = normal_program.valid_selection({"Mean": "normal", "Stddev": "standard", "StddevInformative": "yes"})
    assert not rep.ok
    assert rep.extra == ("StddevInformative",)


def test_valid_selection_missing_hole(normal_program):
    rep = normal_program.valid_selection({"Mean": "normal"})
    assert not rep.ok
    assert rep.missing == ("Stddev",)


def test_close_drops_unreachable(normal_program):
    closed = normal_program.close({"Mean": "normal", "Stddev": "standard", "StddevInformative": "yes"})
    assert dict(closed) == {"Mean": "normal", "Stddev": "standard"}


def test_close_empty(normal_program):
    assert dict(normal_program.close({})) == {}


def test_close_of_valid_is_identity(normal_program):
    sel = {"Mean": "normal", "Stddev": "lognormal", "StddevInformative": "no"}
    assert dict(normal_program.close(sel)) == sel


def test_module_graph_shape(normal_program):
    mg = module_graph(normal_program)
    data = json.loads(mg.to_json())
    kinds = {n["id"]: n["kind"] for n in data["nodes"]}
    assert kinds["base"] == "base"
    assert kinds["Stddev"] == "hole"
    assert kinds["Stddev:lognormal"] == "impl"
    edges = {(e["from"], e["to"]) for e in data["edges"]}
    assert ("base", "Mean") in edges and ("base", "Stddev") in edges
    assert ("base", "StddevInformative") not in edges
    assert ("Stddev", "Stddev:standard") in edges and ("Stddev", "Stddev:lognormal") in edges
    assert ("Stddev:lognormal", "StddevInformative") in edges


def test_module_graph_no_holes():
    mp = ModularProgram(parse("data {\n  int N;\n}\n"))
    mg = module_graph(mp)
    assert [n for n in mg.nodes] == [("base", "base")]
    assert mg.edges == ()


def test_module_graph_golf(golf_program):
    mg = module_graph(golf_program)
    edges = set(mg.edges)
    assert ("base", "NSuccesses") in edges and ("base", "PSuccess") in edges


def test_module_graph_dot_renders(normal_program):
    dot = module_graph(normal_program).to_dot()
    assert dot.startswith("digraph modules {")
    assert '"Stddev:lognormal" -> "StddevInformative";' in dot


def test_inverse_laws_on_fixtures(normal_program, golf_program, birthday_program):
    for mp in (normal_program, golf_program, birthday_program):
        for impl in mp.implementations():
            # i in impls(h) <=> h = par(i)
            assert impl.impl_name in mp.hole_impls(impl.hole_name)
            # holes(i) only mentions holes of the program
            assert impl.holes <= set(mp.all_holes())


def test_holes_monotone_under_selection_growth(birthday_program):
    rng = random.Random(7)
    holes = list(birthday_program.all_holes())
    for _ in range(50):
        chosen = rng.sample(holes, rng.randint(1, len(holes)))
        sel2 = {h: birthday_program.hole_impls(h)[0] for h in chosen}
        sub = rng.sample(chosen, rng.randint(0, len(chosen)))
        sel1 = {h: sel2[h] for h in sub}
        req1 = birthday_program.required_holes(sel1)
        req2 = birthday_program.required_holes(sel2)
        assert req1 <= req2


_impl_names = st.sampled_from(["a", "b", "c"])
_holes = st.sampled_from(["H0", "H1", "H2", "H3"])
_selection = st.dictionaries(_holes, _impl_names, max_size=4)


@given(_selection, _selection, _selection)
def test_siblings_subset_monotonicity(s1, s2, other):
    # I1 subset of I2 implies siblings(I1, I') subset of siblings(I2, I')
    merged = dict(s2)
    merged.update(s1)
    assert siblings(s1, other) <= siblings(merged, other) | siblings(s1, other)
    sub = {h: i for h, i in s1.items()}
    sup = dict(s1)
    sup.update({h: i for h, i in s2.items() if h not in s1})
    assert siblings(sub, other) <= siblings(sup, other)


def test_valid_implies_close_identity_random():
    rng = random.Random(99)
    from modstan.graphs import naive_model_graph

    for _ in range(20):
        mp = ModularProgram(parse(random_program_source(rng)))
        for node in naive_model_graph(mp).nodes:
            assert normalish(mp.close(node)) == normalish(node)


def normalish(sel):
    return tuple(sorted(dict(sel).items()))


def test_valid_selection_unknown_impl(normal_program):
    rep = normal_program.valid_selection({"Mean": "nonexistent", "Stddev": "standard"})
    assert not rep.ok and rep.unknown == ("Mean",)
    assert "does not name an implementation" in rep.message()


def test_modular_program_rejects_macro_templates(fixture_text):
    from modstan.parser import parse as _parse

    with pytest.raises(ValueError):
        ModularProgram(_parse(fixture_text("regression")))
