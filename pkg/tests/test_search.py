from __future__ import annotations

from pathlib import Path

import pytest

from modstan.api import load_program
from modstan.parser import parse
from modstan.program import Selection
from modstan.search import ScorerError, external_scorer, greedy_search, mock_scorer, parameter_count_scorer


SINGLE_HOLE = "model {\n  target += H();\n}\n" + "".join(
    f'module "{n}" H() {{\n  return 1;\n}}\n' for n in ("a", "b", "c")
)


def nav_for(text: str):
    return load_program(text)


def test_single_hole_greedy_walk():
    nav = nav_for(SINGLE_HOLE)
    order = {"a": 0.0, "b": 1.0, "c": 2.0}
    scorer = mock_scorer(lambda sel, _txt: order[dict(sel)["H"]])
    trace = greedy_search(nav, Selection({"H": "a"}), scorer)
    assert trace.result.canonical() == "H:c"
    # start plus its two neighbors: three evaluations, one neighbor round
    assert trace.evaluations == 3
    assert trace.path == ["H:a", "H:c"]


def test_constant_scorer_returns_start():
    nav = nav_for(SINGLE_HOLE)
    scorer = mock_scorer(lambda _sel, _txt: 1.0)
    trace = greedy_search(nav, Selection({"H": "b"}), scorer)
    assert trace.result.canonical() == "H:b"
    assert trace.evaluations == 3  # start scored once, both neighbors once
    assert trace.path == ["H:b"]


def test_parameter_count_scorer_on_three_hole(fixture_text):
    nav = nav_for(fixture_text("normal"))
    scorer = parameter_count_scorer()
    trace = greedy_search(nav, Selection({"Mean": "standard", "Stddev": "standard"}), scorer)
    final = dict(trace.result)
    assert final["Mean"] == "normal" and final["Stddev"] == "lognormal"
    assert trace.result_score == 2.0
    # local optimality: no neighbor scores higher
    for n in nav.neighbors(trace.result):
        assert scorer.cache[n.canonical()] <= trace.result_score


def test_every_selection_scored_at_most_once(fixture_text):
    nav = nav_for(fixture_text("normal"))
    calls: list[str] = []

    def fn(sel, _txt):
        calls.append(sel.canonical())
        return float(len(dict(sel)))

    trace = greedy_search(nav, Selection({"Mean": "standard", "Stddev": "standard"}), mock_scorer(fn))
    assert len(calls) == len(set(calls))
    assert trace.evaluations == len(calls)


def test_evaluations_bounded_by_nodes(fixture_text):
    nav = nav_for(fixture_text("birthday"))
    scorer = parameter_count_scorer()
    trace = greedy_search(nav, nav.default_start(), scorer)
    assert trace.evaluations <= 120
    for n in nav.neighbors(trace.result):
        assert scorer.cache[n.canonical()] <= trace.result_score


def test_external_scorer_stub(fixture_text):
    nav = nav_for(fixture_text("normal"))
    scorer = external_scorer("echo 1.5")
    trace = greedy_search(nav, Selection({"Mean": "standard", "Stddev": "standard"}), scorer)
    assert trace.result.canonical() == "Mean:standard,Stddev:standard"
    assert all(v == 1.5 for _, v in trace.visited)


def test_external_scorer_caches(tmp_path, fixture_text):
    log = tmp_path / "calls.log"
    nav = nav_for(fixture_text("normal"))
    scorer = external_scorer(f"sh -c 'echo run >> {log}; echo 2.0'")
    sel = Selection({"Mean": "standard", "Stddev": "standard"})
    scorer.score(sel, nav)
    scorer.score(sel, nav)
    scorer.score(sel, nav)
    assert log.read_text().count("run") == 1


def test_external_scorer_receives_program_file(tmp_path, fixture_text):
    out = tmp_path / "prog.txt"
    nav = nav_for(fixture_text("normal"))
    scorer = external_scorer(f"sh -c 'cp {{file}} {out}; echo 0.0'")
    scorer.score(Selection({"Mean": "standard", "Stddev": "standard"}), nav)
    assert "x ~ normal(0, 1);" in out.read_text()


def test_external_scorer_failure_aborts_with_partial_trace(fixture_text):
    nav = nav_for(fixture_text("normal"))
    scorer = external_scorer("false")
    trace = greedy_search(nav, Selection({"Mean": "standard", "Stddev": "standard"}), scorer)
    assert trace.aborted is not None
    assert trace.result is None


def test_unparsable_scorer_output(fixture_text):
    nav = nav_for(fixture_text("normal"))
    scorer = external_scorer("echo not-a-number")
    trace = greedy_search(nav, Selection({"Mean": "standard", "Stddev": "standard"}), scorer)
    assert trace.aborted is not None


def test_tie_break_is_lexicographic():
    nav = nav_for(SINGLE_HOLE)
    scores = {"a": 0.0, "b": 1.0, "c": 1.0}
    scorer = mock_scorer(lambda sel, _t: scores[dict(sel)["H"]])
    trace = greedy_search(nav, Selection({"H": "a"}), scorer)
    # b and c tie above the start; the smaller canonical string wins
    assert trace.result.canonical() == "H:b"


def test_search_over_macro_program(fixture_text):
    nav = nav_for(
        """
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
"""
    )
    scorer = parameter_count_scorer()
    trace = greedy_search(nav, nav.default_start(), scorer)
    assert trace.result.canonical() == "Coef:[a,b]"
    assert trace.result_score == 2.0
