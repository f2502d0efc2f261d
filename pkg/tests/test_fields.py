from __future__ import annotations

import pytest

from modstan.checks import check_program
from modstan.graphs import model_graph, naive_model_graph
from modstan.inline import concretize
from modstan.parser import ParseError, parse
from modstan.program import ModularProgram, Selection
from modstan.render import render

TRANSFORM = """
data {
  int N;
  vector[N] y;
}
model {
  vector[N] z = Transformation.forward(y);
  z ~ normal(0, 1);
  target += sum(Transformation.reverse(z));
}

module "logshift" Transformation {
  parameters {
    real shift;
  }
  field forward(x) {
    return log(x) + shift;
  }
  field reverse(x) {
    return exp(x - shift);
  }
}

module "identity" Transformation {
  field forward(x) {
    return x;
  }
  field reverse(x) {
    return x;
  }
}
"""


@pytest.fixture(scope="module")
def transform():
    return ModularProgram(parse(TRANSFORM))


def test_field_program_parses_and_round_trips():
    p = parse(TRANSFORM)
    assert parse(render(p)) == p
    impl = next(i for i in p.impls if i.impl_name == "logshift")
    assert [f.name for f in impl.fields] == ["forward", "reverse"]


def test_field_signatures_inferred_per_field(transform):
    res = check_program(transform)
    assert res.ok
    sig = res.signatures["Transformation"]
    per_field = {n: fs for n, fs in sig.fields}
    assert [str(t) for t in per_field["forward"].arg_types] == ["vector"]
    assert str(per_field["reverse"].ret_type) == "vector"


def test_fields_are_co_selected(transform):
    g = model_graph(transform)
    assert len(g.nodes) == 2 and len(g.edges) == 1
    assert g.node_ids() == naive_model_graph(transform).node_ids()


def test_field_concretization_shares_appends(transform):
    text = render(concretize(transform, Selection({"Transformation": "logshift"})))
    assert text.count("real shift;") == 1
    assert "log(y) + shift" in text
    assert "exp(z - shift)" in text
    reparsed = ModularProgram(parse(text))
    assert not reparsed.base_holes()
    assert check_program(reparsed).ok


def test_mismatched_field_sets_rejected():
    src = TRANSFORM + '\nmodule "broken" Transformation {\n  field forward(x) {\n    return x;\n  }\n}\n'
    res = check_program(ModularProgram(parse(src)))
    assert any(d.code == "ARGTYPE_MISMATCH" for d in res.diagnostics)


def test_anonymous_field_cannot_mix_with_named():
    bad = 'model {\n  target += H.a(1);\n}\nmodule "m" H {\n  field a(x) {\n    return x;\n  }\n  field(x) {\n    return x;\n  }\n}\n'
    with pytest.raises(ParseError):
        parse(bad)


def test_fields_variant_forbids_header_params():
    bad = 'model {\n  target += H.a(1);\n}\nmodule "m" H(x) {\n  field a(z) {\n    return z;\n  }\n}\n'
    with pytest.raises(ParseError):
        parse(bad)
