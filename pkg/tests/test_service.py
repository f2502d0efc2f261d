from __future__ import annotations

import json
import warnings

import pytest

from conftest import FIXTURES

warnings.filterwarnings("ignore", message=".*testclient.*")

from fastapi.testclient import TestClient  # noqa: E402

from modstan.service import create_app  # noqa: E402


@pytest.fixture()
def client(tmp_path):
    src_path = tmp_path / "normal.mstan"
    src_path.write_text((FIXTURES / "normal.mstan").read_text())
    app = create_app(source=src_path.read_text(), source_path=str(src_path))
    return TestClient(app), src_path


def test_model_graph_endpoint(client):
    c, _ = client
    g = c.get("/model-graph").json()
    assert len(g["nodes"]) == 6 and len(g["edges"]) == 9


def test_compile_returns_module_graph_and_diagnostics(client):
    c, _ = client
    r = c.post("/compile", json={"source": (FIXTURES / "golf.mstan").read_text()}).json()
    assert r["ok"]
    kinds = {n["kind"] for n in r["moduleGraph"]["nodes"]}
    assert kinds == {"base", "hole", "impl"}


def test_compile_reports_errors_without_replacing_state(client):
    c, _ = client
    r = c.post("/compile", json={"source": "model {\n  x ~ normal(0, 1);\n}\n"}).json()
    assert not r["ok"] and r["diagnostics"]
    # previous program still served
    assert len(c.get("/model-graph").json()["nodes"]) == 6


def test_compile_parse_error_diagnostic(client):
    c, _ = client
    r = c.post("/compile", json={"source": "data {"}).json()
    assert not r["ok"] and r["diagnostics"][0]["code"] == "PARSE_ERROR"


def test_concretize_partial_lists_compatible_models(client):
    c, _ = client
    r = c.post("/concretize", json={"selection": "Mean:normal"}).json()
    assert not r["ok"]
    assert len(r["compatibleModels"]) == 3
    assert all("Mean:normal" in m for m in r["compatibleModels"])


def test_concretize_complete_returns_program(client):
    c, _ = client
    r = c.post("/concretize", json={"selection": "Mean:normal,Stddev:lognormal,StddevInformative:yes"}).json()
    assert r["ok"]
    assert "sigma ~ lognormal(0, 1);" in r["program"]
    assert len(r["compatibleModels"]) == 1


def test_concretize_bad_selection_400(client):
    c, _ = client
    r = c.post("/concretize", json={"selection": "Mean:::"})
    assert r.status_code == 400


def test_neighbors_endpoint(client):
    c, _ = client
    r = c.post("/neighbors", json={"selection": "Mean:standard,Stddev:standard"}).json()
    assert len(r["neighbors"]) == 3


def test_annotations_round_trip_and_persistence(client):
    c, src_path = client
    key = "Mean:normal,Stddev:standard"
    r = c.put("/annotations", json={"models": {key: {"label": "model 2", "notes": "baseline"}}})
    assert r.json()["ok"]
    got = c.get(f"/annotations/{key}").json()
    assert got == {"label": "model 2", "notes": "baseline"}
    # persisted next to the source, separate file
    sidecar = src_path.with_suffix(".annotations.json")
    assert sidecar.exists()
    data = json.loads(sidecar.read_text())
    assert data["models"][key]["label"] == "model 2"


def test_annotation_missing_key_404(client):
    c, _ = client
    assert c.get("/annotations/unknown-selection").status_code == 404


def test_single_annotation_put(client):
    c, _ = client
    key = "Mean:standard,Stddev:standard"
    c.put(f"/annotations/{key}", json={"label": "start", "notes": ""})
    assert c.get(f"/annotations/{key}").json()["label"] == "start"


def test_macro_program_above_cap(client):
    c, _ = client
    r = c.post("/compile", json={"source": (FIXTURES / "regression.mstan").read_text()})
    assert r.json()["ok"]
    g = c.get("/model-graph")
    assert g.status_code == 404
    assert g.json()["detail"]["count"] == {"base": 2, "exponent": 166750}
    n = c.post("/neighbors", json={"selection": "Feature:[1],FeaturePair:[],FeatureTriplet:[]"}).json()
    assert len(n["neighbors"]) == 166750


def test_cli_and_service_emit_identical_graph_json(client, capsys):
    from modstan.cli import main

    c, _ = client
    service_payload = c.get("/model-graph").json()
    main(["graph", str(FIXTURES / "normal.mstan"), "--format", "json"])
    cli_payload = json.loads(capsys.readouterr().out)
    assert cli_payload == service_payload
