from __future__ import annotations

import time

import pytest

from modstan.graphs import model_graph, model_neighbors, naive_model_graph
from modstan.macros import (
    MacroError,
    MacroProgram,
    expand_ranges,
    program_has_macros,
    symbolic_count,
)
from modstan.parser import parse
from modstan.render import render
from modstan.selections import SelectionError
from modstan.syntax import RangeAtom


COLLECTION3 = """
data {
  int N;
  vector[N] y;
}
model {
  y ~ normal(sum(Coef+(N)), 1);
}
module "a" Coef(k) {
  parameters {
    real alpha;
  }
  return alpha*k;
}
module "b" Coef(k) {
  parameters {
    real beta;
  }
  return beta*k*k;
}
module "c" Coef(k) {
  return 1;
}
"""


@pytest.fixture(scope="module")
def collection3():
    return MacroProgram(parse(COLLECTION3))


@pytest.fixture(scope="module")
def regression(fixture_text):
    return MacroProgram(parse(fixture_text("regression")))


def test_macro_detection(fixture_text):
    assert program_has_macros(parse(fixture_text("regression")))
    assert not program_has_macros(parse(fixture_text("normal")))


# -- collections ---------------------------------------------------------------


def test_collection_translation_formula(collection3):
    sel = collection3.selection_from_string("Coef:[a,c]")
    core = collection3.translate(sel)
    assert dict(core) == {
        "Coef": "merge_Coef",
        "Coef_a": "yes",
        "Coef_b": "no",
        "Coef_c": "yes",
    }


def test_collection_empty_subset(collection3):
    sel = collection3.selection_from_string("Coef:[]")
    assert collection3.is_valid_selection(sel)
    text = render(collection3.concretize(sel))
    assert "sum({})" in text


def test_collection_hamming_cube(collection3):
    g = model_graph(collection3.unit_space())
    assert len(g.nodes) == 8 and len(g.edges) == 12
    for e in g.edges:
        assert e.hole.startswith("Coef_")
        assert set(e.impls) == {"yes", "no"}


def test_collection_graph_matches_naive(collection3):
    space = collection3.unit_space()
    a, b = model_graph(space), naive_model_graph(space)
    assert a.node_ids() == b.node_ids()
    assert [e.key() for e in a.edges] == [e.key() for e in b.edges]


def test_unknown_member_rejected(collection3):
    with pytest.raises(SelectionError) as exc:
        collection3.selection_from_string("Coef:[a,zzz]")
    assert exc.value.code == "UNKNOWN_MEMBER"


def test_full_expansion_follows_published_construction(collection3):
    expanded, _space = collection3.expand_full()
    assert set(expanded.hole_impls("Coef_a")) == {"yes", "no"}
    assert expanded.hole_impls("Coef") == ("merge_Coef",)
    g = model_graph(expanded)
    assert len(g.nodes) == 8 and len(g.edges) == 12


def test_expansion_of_core_program_is_identity(fixture_text):
    # a macro-free program passes through the macro layer untouched
    assert not program_has_macros(parse(fixture_text("normal")))


# -- indexed holes ------------------------------------------------------------------


INDEXED = """
data {
  matrix[3, 4] x;
}
model {
  target += sum(Row[1..3](x));
}
module "f" Row[n](m) {
  return m[n];
}
"""


def test_indexed_hole_members():
    mp = MacroProgram(parse(INDEXED))
    assert mp.member_counts()["Row"] == 3
    assert mp.unit_impls("Row") == ("f[1]", "f[2]", "f[3]")
    sel = mp.selection_from_string("Row:f[2]")
    text = render(mp.concretize(sel))
    assert "sum(x[2])" in text


def test_indexed_out_of_range():
    mp = MacroProgram(parse(INDEXED))
    with pytest.raises(SelectionError) as exc:
        mp.selection_from_string("Row:f[5]")
    assert exc.value.code == "INDEX_OUT_OF_RANGE"


def test_indexed_template_arity_checked():
    src = INDEXED.replace("Row[1..3]", "Row[1..3,1..2]")
    with pytest.raises(MacroError):
        MacroProgram(parse(src))


# -- instances and copies ----------------------------------------------------------------


INSTANCES = """
data {
  int N;
  vector[N] a;
  vector[N] b;
}
model {
  a ~ normal(Cloud<1>(a), 1);
  b ~ normal(Cloud<2>(b), 1);
}
module "gauss" Cloud(x) {
  parameters {
    real theta;
  }
  theta ~ normal(0, 1);
  return theta + mean(x);
}
module "flat" Cloud(x) {
  return 0;
}
"""


def test_instances_share_selection_and_rename_parameters():
    mp = MacroProgram(parse(INSTANCES))
    g = model_graph(mp.unit_space())
    assert len(g.nodes) == 2  # same binding for both instances
    text = render(mp.concretize(mp.selection_from_string("Cloud:gauss")))
    assert "real theta_Cloud_1;" in text and "real theta_Cloud_2;" in text


def test_single_instance_graph_size_unchanged():
    src = INSTANCES.replace("Cloud<2>(b)", "Cloud<1>(b)")
    mp = MacroProgram(parse(src))
    assert len(model_graph(mp.unit_space()).nodes) == 2


def test_copies_select_independently():
    src = INSTANCES.replace("Cloud<1>", "Cloud<<1>>").replace("Cloud<2>", "Cloud<<2>>")
    mp = MacroProgram(parse(src))
    assert len(model_graph(mp.unit_space()).nodes) == 4
    sel = mp.selection_from_string("Cloud<<1>>:gauss,Cloud<<2>>:flat")
    text = render(mp.concretize(sel))
    assert "theta_Cloud_1" in text and "theta_Cloud_2" not in text


def test_missing_copy_binding():
    src = INSTANCES.replace("Cloud<1>", "Cloud<<1>>").replace("Cloud<2>", "Cloud<<2>>")
    mp = MacroProgram(parse(src))
    sel = mp.selection_from_string("Cloud<<1>>:gauss")
    violations = mp.validate_selection(sel)
    assert any("MISSING_COPY_BINDING" in v for v in violations)


def test_ranged_instances_build_an_array():
    src = """
data {
  int N;
  vector[N] y;
}
model {
  y ~ normal(sum(Part<1..3>(y)), 1);
}
module "p" Part(x) {
  parameters {
    real w;
  }
  return w*mean(x);
}
module "z" Part(x) {
  return 0;
}
"""
    mp = MacroProgram(parse(src))
    text = render(mp.concretize(mp.selection_from_string("Part:p")))
    assert "w_Part_1" in text and "w_Part_2" in text and "w_Part_3" in text
    assert "sum({" in text


# -- ranges ---------------------------------------------------------------------------------


def test_multi_range_product():
    atoms = (RangeAtom(1, 3), RangeAtom(1, 5))
    assert len(expand_ranges(atoms)) == 15


def test_range_exponent_square():
    assert len(expand_ranges((RangeAtom(1, 3, 2, ""),))) == 9


def test_range_permutations_exclude_repeats():
    out = expand_ranges((RangeAtom(1, 3, 3, "P"),))
    assert len(out) == 6
    assert (1, 1, 1) not in out and (2, 2, 2) not in out and (3, 3, 3) not in out


def test_range_combinations():
    assert expand_ranges((RangeAtom(1, 3, 3, "C"),)) == [(1, 2, 3)]
    assert len(expand_ranges((RangeAtom(1, 3, 2, "C"),))) == 3


# -- products ----------------------------------------------------------------------------------


PRODUCT = """
data {
  int N;
  matrix[100, N] x;
  vector[N] y;
}
parameters {
  real sigma;
}
model {
  vector[N] total = rep_vector(0.0, N);
  for ((t, r) in Theta*Col[1..4]+()) {
    total = total + t*r;
  }
  y ~ normal(total, sigma);
}
module "t" Theta() {
  parameters {
    real theta;
  }
  return theta;
}
module "r" Col[n]() {
  return to_vector(x[n]);
}
"""

PRODUCT_TWO = """
data {
  real u;
}
model {
  target += sum(A*B(u)(u));
}
module "a1" A(x) {
  return x;
}
module "a2" A(x) {
  return x + 1;
}
module "b1" B(z) {
  return z;
}
module "b2" B(z) {
  return 2*z;
}
module "b3" B(z) {
  return 3*z;
}
"""


def test_product_of_two_holes_multiplies_impls():
    mp = MacroProgram(parse(PRODUCT_TWO))
    assert mp.member_counts()["A*B"] == 6
    assert len(mp.unit_impls("A*B")) == 6


def test_product_with_indexed_operand():
    mp = MacroProgram(parse(PRODUCT))
    assert mp.member_counts()["Theta*Col"] == 4
    sel = mp.selection_from_string("Theta*Col:[(t,1),(t,2)]")
    text = render(mp.concretize(sel))
    assert text.count("real theta_") == 2
    assert "(t, r)" in text


def test_hole_exponent_combinations():
    src = PRODUCT_TWO.replace("A*B(u)(u)", "B^C2(u)(u)")
    mp = MacroProgram(parse(src))
    assert mp.member_counts()["B^C2"] == 3  # C(3,2)


def test_unknown_impl_in_product_tuple():
    mp = MacroProgram(parse(PRODUCT_TWO))
    with pytest.raises(SelectionError):
        mp.selection_from_string("A*B:[(a1,zzz)]")


# -- lazy counting ---------------------------------------------------------------------------------


def test_regression_member_counts(regression):
    counts = regression.member_counts()
    assert counts == {"Feature": 100, "FeaturePair": 4950, "FeatureTriplet": 161700}
    assert sum(counts.values()) == 166750


def test_regression_node_count_symbolic(regression):
    count = regression.node_count()
    assert count == 2**166750
    assert symbolic_count(count) == {"base": 2, "exponent": 166750}


def test_plain_hole_member_count(collection3):
    assert collection3.member_counts()["Coef"] == 3


def test_symbolic_count_small_values_exact():
    assert symbolic_count(120) == 120
    assert symbolic_count(3 * 2**100) == {"coefficient": 3, "base": 2, "exponent": 100}


# -- laziness --------------------------------------------------------------------------------------


def test_neighbor_enumeration_is_lazy(regression):
    sel = regression.selection_from_string("Feature:[1,2,3],FeaturePair:[(1,2)],FeatureTriplet:[(1,2,3)]")
    regression.instantiations = 0
    t0 = time.perf_counter()
    nbrs = regression.neighbors(sel)
    elapsed = time.perf_counter() - t0
    assert len(nbrs) == 166750
    assert regression.instantiations == 0
    assert elapsed < 2.0


def test_concretize_materializes_only_selected_members(regression):
    sel = regression.selection_from_string("Feature:[5],FeaturePair:[],FeatureTriplet:[]")
    regression.instantiations = 0
    text = render(regression.concretize(sel))
    assert regression.instantiations < 1000
    assert "theta_Feature_5" in text


# -- selection translation round trip -----------------------------------------------------------------


@pytest.mark.parametrize(
    "text",
    [
        "Coef:[a,c]",
        "Coef:[]",
        "Coef:[a,b,c]",
    ],
)
def test_translate_inverse_identity(collection3, text):
    sel = collection3.selection_from_string(text)
    assert collection3.inverse_translate(collection3.translate(sel)).canonical() == sel.canonical()


def test_translate_inverse_identity_instances():
    mp = MacroProgram(parse(INSTANCES))
    sel = mp.selection_from_string("Cloud:gauss")
    assert mp.inverse_translate(mp.translate(sel)).canonical() == "Cloud:gauss"


def test_macro_native_neighbors_match_unit_graph(collection3):
    space = collection3.unit_space()
    g = model_graph(space)
    for text in ("Coef:[a,c]", "Coef:[]", "Coef:[a,b,c]"):
        sel = collection3.selection_from_string(text)
        unit_sel = collection3.translate(sel)
        native = {collection3.translate(n).canonical() for n in collection3.neighbors(sel)}
        adjacency = {n.canonical() for n in g.adjacency(unit_sel)}
        assert native == adjacency


def test_product_with_hundred_columns_counts_without_materializing():
    src = PRODUCT.replace("Col[1..4]", "Col[1..100]")
    mp = MacroProgram(parse(src))
    mp.instantiations = 0
    assert mp.member_counts()["Theta*Col"] == 100
    assert mp.instantiations == 0


def test_instance_index_propagates_into_templates():
    # a template instance tag <j> copies deeper into the module graph
    src = """
data {
  int N;
  vector[N] a;
  vector[N] b;
}
model {
  a ~ normal(Outer<1>(a), 1);
  b ~ normal(Outer<2>(b), 1);
}
module "o" Outer<j>(x) {
  return Inner<j>(x) + 1;
}
module "i" Inner(x) {
  parameters {
    real w;
  }
  return w*mean(x);
}
module "z" Inner(x) {
  return 0;
}
"""
    mp = MacroProgram(parse(src))
    sel = mp.selection_from_string("Outer:o,Inner:i")
    text = render(mp.concretize(sel))
    assert "w_Inner_1" in text and "w_Inner_2" in text
    # the inner family shares one binding: flipping it flips both copies
    g = model_graph(mp.unit_space())
    assert len(g.nodes) == 2


VOID_COLLECTION = """
data {
  int N;
  vector[N] y;
}
parameters {
  real mu;
}
model {
  LikelihoodTerms+(y, mu);
}
module "gaussian" LikelihoodTerms(x | m) {
  parameters {
    real<lower=0> s1;
  }
  x ~ normal(m, s1);
}
module "heavy" LikelihoodTerms(x | m) {
  parameters {
    real<lower=0> s2;
  }
  x ~ student_t(3, m, s2);
}
"""


def test_void_collection_splices_statements():
    mp = MacroProgram(parse(VOID_COLLECTION))
    sel = mp.selection_from_string("LikelihoodTerms:[gaussian,heavy]")
    text = render(mp.concretize(sel))
    assert "y ~ normal(mu, s1_LikelihoodTerms_gaussian);" in text
    assert "y ~ student_t(3, mu, s2_LikelihoodTerms_heavy);" in text
    only = render(mp.concretize(mp.selection_from_string("LikelihoodTerms:[heavy]")))
    assert "normal" not in only and "student_t" in only
    none = render(mp.concretize(mp.selection_from_string("LikelihoodTerms:[]")))
    assert "student_t" not in none and "~" not in none.split("model {")[1]


def test_void_collection_graph_is_still_a_cube():
    mp = MacroProgram(parse(VOID_COLLECTION))
    g = model_graph(mp.unit_space())
    assert len(g.nodes) == 4 and len(g.edges) == 4


def test_random_collection_programs_native_neighbors_match_unit_graph():
    # randomized mixes of one collection hole plus plain holes: the sparse
    # macro-native neighbor enumeration must agree with the materialized
    # unit-space adjacency on every node
    import random as _random

    rng = _random.Random(424242)
    for trial in range(12):
        n_members = rng.randint(2, 4)
        n_plain = rng.randint(0, 2)
        lines = ["data {", "  int N;", "}", "model {"]
        call = "sum(Coll+(N))"
        for p in range(n_plain):
            call += f" + P{p}()"
        lines.append(f"  target += {call};")
        lines.append("}")
        for m in range(n_members):
            lines.append(f'module "m{m}" Coll(k) {{')
            if rng.random() < 0.5:
                lines.append("  parameters {")
                lines.append(f"    real w{m};")
                lines.append("  }")
                lines.append(f"  return w{m}*k;")
            else:
                lines.append(f"  return {m};")
            lines.append("}")
        for p in range(n_plain):
            for i in range(rng.randint(1, 3)):
                lines.append(f'module "q{i}" P{p}() {{')
                lines.append(f"  return {i};")
                lines.append("}")
        mp = MacroProgram(parse("\n".join(lines) + "\n"))
        space = mp.unit_space()
        g = model_graph(space)
        for node in g.nodes:
            msel = mp.inverse_translate(node)
            native = {mp.translate(nb).canonical() for nb in mp.neighbors(msel)}
            adjacency = {n.canonical() for n in g.adjacency(node)}
            assert native == adjacency, f"trial {trial}: {msel.canonical()}"


CONDITIONAL = """
data {
  int N;
}
model {
  target += Mode();
}
module "simple" Mode() {
  return 1;
}
module "rich" Mode() {
  return sum(Extras+());
}
module "e1" Extras() {
  return 1;
}
module "e2" Extras() {
  return 2;
}
"""


def test_conditional_collection_nodes_and_edges():
    mp = MacroProgram(parse(CONDITIONAL))
    g = model_graph(mp.unit_space())
    assert len(g.nodes) == 5  # simple, plus rich x 4 subsets
    assert len(g.edges) == 8  # 4 mode swaps + the 2-cube among rich nodes
    assert mp.node_count() == 5


def test_conditional_collection_neighbors_enumerate_completions():
    mp = MacroProgram(parse(CONDITIONAL))
    g = model_graph(mp.unit_space())
    for text in ("Mode:simple", "Mode:rich,Extras:[]", "Mode:rich,Extras:[e1,e2]"):
        sel = mp.selection_from_string(text)
        native = {mp.translate(n).canonical() for n in mp.neighbors(sel)}
        adjacency = {n.canonical() for n in g.adjacency(mp.translate(sel))}
        assert native == adjacency, text


def test_conditional_collection_completion_cap():
    src = CONDITIONAL.replace("Extras+()", "Extras[1..20]+()").replace(
        'module "e1" Extras() {\n  return 1;\n}\nmodule "e2" Extras() {\n  return 2;\n}',
        'module "e" Extras[n]() {\n  return n;\n}',
    )
    mp = MacroProgram(parse(src))
    assert mp.member_counts()["Extras"] == 20
    sel = mp.selection_from_string("Mode:simple")
    with pytest.raises(MacroError):
        mp.neighbors(sel)  # 2^20 completions through the exposed collection


def test_macro_layer_is_identity_on_core_programs(fixture_text):
    # running a plain program through the macro machinery changes nothing
    from modstan.inline import concretize as core_concretize
    from modstan.program import ModularProgram, Selection

    text = fixture_text("normal")
    mp = MacroProgram(parse(text))
    core = ModularProgram(parse(text))
    sel_text = "Mean:normal,Stddev:lognormal,StddevInformative:yes"
    via_macro = render(mp.concretize(mp.selection_from_string(sel_text)))
    via_core = render(
        core_concretize(core, Selection({"Mean": "normal", "Stddev": "lognormal", "StddevInformative": "yes"}))
    )
    assert via_macro == via_core
    g1 = model_graph(mp.unit_space())
    g2 = model_graph(core)
    assert g1.node_ids() == g2.node_ids()
    assert [e.key() for e in g1.edges] == [e.key() for e in g2.edges]


def test_flip_member_toggles_subsets():
    from modstan.macros import MemberKey

    mp = MacroProgram(parse(COLLECTION3))
    sel = mp.selection_from_string("Coef:[a]")
    added = sel.flip_member("Coef", MemberKey(("b",)))
    assert added.canonical() == "Coef:[a,b]"
    removed = added.flip_member("Coef", MemberKey(("a",)))
    assert removed.canonical() == "Coef:[b]"


def test_concurrent_macro_concretizations(regression):
    import threading

    sels = [
        "Feature:[1],FeaturePair:[],FeatureTriplet:[]",
        "Feature:[2,3],FeaturePair:[(1,2)],FeatureTriplet:[]",
        "Feature:[],FeaturePair:[],FeatureTriplet:[(1,2,3)]",
    ]
    expected = [render(regression.concretize(regression.selection_from_string(s))) for s in sels]
    out: dict[int, list[str]] = {k: [] for k in range(len(sels))}

    def worker(k: int):
        for _ in range(5):
            out[k].append(render(regression.concretize(regression.selection_from_string(sels[k]))))

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(len(sels))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for k, texts in out.items():
        assert all(t == expected[k] for t in texts)


def test_check_probes_templates_of_huge_programs(fixture_text):
    from modstan.api import load_program

    ok = load_program(fixture_text("regression")).check()
    assert ok.ok
    broken = fixture_text("regression").replace("return theta*x[n];", "return theta*zzz[n];")
    res = load_program(broken).check()
    assert not res.ok
    assert any("zzz" in d.message for d in res.diagnostics)
