from __future__ import annotations

import pytest

from modstan.parser import ParseError, parse, parse_with_comments
from modstan.program import ModularProgram
from modstan.render import render
from modstan.syntax import ArrayLit, Call, HoleCall, IntLit, TildeStmt
from modstan.tokens import LexError

from conftest import random_program_source
import random


def test_three_hole_fixture_structure(fixture_text):
    p = parse(fixture_text("normal"))
    assert [b.kind for b in p.blocks] == ["data", "model"]
    assert len(p.impls) == 6
    mp = ModularProgram(p)
    assert set(mp.all_holes()) == {"Mean", "Stddev", "StddevInformative"}
    assert mp.base_holes() == {"Mean", "Stddev"}


def test_plain_program_has_no_impls():
    p = parse("data {\n  int N;\n}\nmodel {\n  target += 1;\n}\n")
    assert p.impls == ()
    assert not ModularProgram(p).base_holes()


def test_indexed_collection_decoration(fixture_text):
    p = parse(fixture_text("regression"))
    model = p.block("model")
    stmt = model.stmts[0]
    assert isinstance(stmt, TildeStmt)
    holes = [hc for hc in _holes_of(stmt)]
    names = {hc.ref.base_name for hc in holes}
    assert "Feature" in names
    feature = next(hc for hc in holes if hc.ref.base_name == "Feature")
    assert feature.ref.collect
    term = feature.ref.terms[0]
    assert term.ranges[0].lo == 1 and term.ranges[0].hi == 100
    pair = next(hc for hc in holes if hc.ref.base_name == "FeaturePair")
    atom = pair.ref.terms[0].ranges[0]
    assert (atom.lo, atom.hi, atom.exp, atom.mode) == (1, 100, 2, "C")


def _holes_of(stmt):
    from modstan.walk import iter_hole_calls

    return list(iter_hole_calls((stmt,)))


def test_hole_spans_cover_names(fixture_text):
    text = fixture_text("normal")
    mp = ModularProgram(parse(text))
    sites = mp.sites()
    assert len(sites) == 3
    for s in sites:
        assert text[s.span.start : s.span.end].startswith(s.hole)


def test_tilde_hole_records_observed_side(fixture_text):
    mp = ModularProgram(parse(fixture_text("golf")))
    ns = next(s for s in mp.sites() if s.hole == "NSuccesses")
    assert ns.statement and ns.tilde_lhs is not None
    assert len(ns.effective_args()) == 3


def test_module_header_with_observed_params(fixture_text):
    p = parse(fixture_text("golf"))
    binom = next(i for i in p.impls if i.impl_name == "binomial")
    f = binom.fields[0]
    assert [pp.name for pp in f.obs_params] == ["y"]
    assert [pp.name for pp in f.params] == ["n", "p"]


def test_comments_are_trivia(fixture_text):
    program, comments = parse_with_comments(fixture_text("golf"))
    assert any("ball radius" in c.text for c in comments)
    assert "//" not in render(program)


def test_uppercase_unknown_call_becomes_hole():
    p = parse("model {\n  target += Mystery();\n}\n")
    mp = ModularProgram(p)
    assert mp.base_holes() == {"Mystery"}


def test_known_builtin_stays_function():
    p = parse("data {\n  vector[3] x;\n}\nmodel {\n  target += sum(Phi(x));\n}\n")
    assert not ModularProgram(p).base_holes()


def test_product_site_vs_multiplication():
    src = (
        "data {\n  real a;\n}\nmodel {\n  target += a*logit(a);\n}\n"
        'module "x" Unused() {\n  return 1;\n}\n'
    )
    p = parse(src)
    # a*logit(a) is ordinary multiplication, not a product hole
    assert ModularProgram(p).base_holes() == set()


@pytest.mark.parametrize(
    "bad",
    [
        "data {\n  int N;\n",  # dropped brace
        "model {\n  x ~ ;\n}\n",  # malformed tilde
        "frobnicate {\n}\n",  # unknown block name
        "model {\n}\ndata {\n  int N;\n}\n",  # out of order
        'module "a" {\n  return 1;\n}\n',  # missing hole name
        "module a H() {\n  return 1;\n}\n",  # unquoted impl name
        "model {\n  target += Feature[3..1]+(x);\n}\n",  # reversed range
        "model {\n  target += H(1);\n}\nmodule \"a\" H() {\n  return 1;\n  return 2;\n}\n",  # two returns
        "data {\n  target += 1;\n}\n",  # statement in a declarations-only block
        "model {\n  int x = 1\n}\n",  # missing semicolon
    ],
)
def test_rejection_corpus(bad):
    with pytest.raises((ParseError, LexError)):
        parse(bad)


def test_parse_error_carries_location_and_expectations():
    with pytest.raises(ParseError) as exc:
        parse("model {\n  int x = ;\n}\n")
    assert exc.value.line == 2
    assert exc.value.expected


@pytest.mark.parametrize("name", ["normal", "golf", "birthday", "regression"])
def test_round_trip_fixture(fixture_text, name):
    p = parse(fixture_text(name))
    text = render(p)
    p2 = parse(text)
    assert p2 == p
    assert render(p2) == text


def test_round_trip_random_programs():
    rng = random.Random(20240811)
    for _ in range(25):
        src = random_program_source(rng)
        p = parse(src)
        assert parse(render(p)) == p
