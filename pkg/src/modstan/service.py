"""HTTP service exposing the compiler to scripts and the explorer UI.

The service holds one compiled program as shared immutable state; POST
/compile swaps it atomically. Model graphs are materialized only below a
node cap; above it the service answers neighbor queries and symbolic counts
so that huge macro-generated spaces stay navigable. Annotations (labels and
notes keyed by the canonical selection string) persist in a JSON file next
to the source, separate from the program itself.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .api import LoadedProgram, load_program
from .graphs import CapExceeded
from .inline import ConcretizeError
from .macros import MacroError, symbolic_count
from .parser import ParseError
from .selections import SelectionError
from .tokens import LexError


class CompileRequest(BaseModel):
    source: str


class SelectionRequest(BaseModel):
    selection: str


class AnnotationEntry(BaseModel):
    label: str = ""
    notes: str = ""


class AnnotationsDocument(BaseModel):
    models: dict[str, AnnotationEntry] = {}


class _State:
    def __init__(self, cap: int, annotations_path: Optional[Path]):
        self.cap = cap
        self.lock = threading.Lock()
        self.loaded: Optional[LoadedProgram] = None
        self.annotations_path = annotations_path
        self.annotations: dict[str, dict] = {}
        if annotations_path and annotations_path.exists():
            try:
                doc = json.loads(annotations_path.read_text(encoding="utf-8"))
                self.annotations = doc.get("models", {})
            except (OSError, json.JSONDecodeError):
                self.annotations = {}

    def persist_annotations(self) -> None:
        if self.annotations_path is None:
            return
        self.annotations_path.write_text(
            json.dumps({"models": self.annotations}, indent=2), encoding="utf-8"
        )


def _diag_payload(diags) -> list[dict]:
    return [d.to_dict() for d in diags]


def create_app(
    source: Optional[str] = None,
    source_path: Optional[str] = None,
    cap: int = 5000,
    ui_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="modstan service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    annotations_path = None
    if source_path:
        annotations_path = Path(source_path).with_suffix(".annotations.json")
    state = _State(cap, annotations_path)

    def compile_source(text: str) -> dict:
        try:
            loaded = load_program(text)
        except (ParseError, LexError) as e:
            span = {"line": getattr(e, "line", 0), "col": getattr(e, "col", 0), "len": 0}
            return {
                "ok": False,
                "diagnostics": [{"code": "PARSE_ERROR", "span": span, "message": str(e)}],
            }
        except MacroError as e:
            return {"ok": False, "diagnostics": [{"code": e.code, "span": None, "message": str(e)}]}
        result = loaded.check()
        payload = {
            "ok": result.ok,
            "diagnostics": _diag_payload(result.diagnostics),
            "moduleGraph": json.loads(loaded.module_graph().to_json()),
            "isMacro": loaded.is_macro,
        }
        if result.ok:
            with state.lock:
                state.loaded = loaded
        return payload

    if source is not None:
        initial = compile_source(source)
        if not initial.get("ok"):
            raise RuntimeError(f"initial program rejected: {initial['diagnostics']}")

    def current() -> LoadedProgram:
        with state.lock:
            loaded = state.loaded
        if loaded is None:
            raise HTTPException(status_code=400, detail="no program compiled yet")
        return loaded

    @app.get("/source")
    def source_endpoint():
        return {"source": source or "", "path": source_path}

    @app.post("/compile")
    def compile_endpoint(req: CompileRequest):
        return compile_source(req.source)

    @app.get("/model-graph")
    def model_graph_endpoint():
        loaded = current()
        try:
            g = loaded.model_graph(cap=state.cap)
        except CapExceeded as e:
            raise HTTPException(
                status_code=404,
                detail={"reason": "model graph above materialization cap",
                        "count": symbolic_count(e.total), "cap": e.cap},
            )
        payload = json.loads(g.to_json())
        if loaded.is_macro:
            for node in payload["nodes"]:
                node["display"] = loaded.display_selection(
                    next(n for n in g.nodes if n.canonical() == node["id"])
                )
        return payload

    @app.get("/module-graph")
    def module_graph_endpoint():
        return json.loads(current().module_graph().to_json())

    @app.post("/concretize")
    def concretize_endpoint(req: SelectionRequest):
        loaded = current()
        try:
            sel = loaded.selection(req.selection)
        except SelectionError as e:
            raise HTTPException(status_code=400, detail={"code": e.code, "message": str(e)})
        violations = loaded.selection_violations(sel)
        compatible = _compatible_models(loaded, req.selection, state.cap)
        if violations:
            return {"ok": False, "violations": violations, "compatibleModels": compatible}
        try:
            text = loaded.concretize_text(sel)
        except (ConcretizeError, MacroError) as e:
            raise HTTPException(status_code=400, detail={"code": getattr(e, "code", "ERROR"), "message": str(e)})
        return {
            "ok": True,
            "program": text,
            "selection": sel.canonical(),
            "compatibleModels": compatible,
        }

    @app.post("/neighbors")
    def neighbors_endpoint(req: SelectionRequest):
        loaded = current()
        try:
            sel = loaded.selection(req.selection)
            violations = loaded.selection_violations(sel)
            if violations:
                raise SelectionError("; ".join(violations))
            neighbors = loaded.neighbors(sel)
        except (SelectionError, MacroError) as e:
            raise HTTPException(status_code=400, detail={"code": getattr(e, "code", "ERROR"), "message": str(e)})
        return {"neighbors": [n.canonical() for n in neighbors]}

    @app.get("/annotations")
    def get_annotations():
        return {"models": state.annotations}

    @app.get("/annotations/{model_id:path}")
    def get_annotation(model_id: str):
        if model_id not in state.annotations:
            raise HTTPException(status_code=404, detail=f"no annotation for {model_id!r}")
        return state.annotations[model_id]

    @app.put("/annotations")
    def put_annotations(doc: AnnotationsDocument):
        with state.lock:
            state.annotations = {k: v.model_dump() for k, v in doc.models.items()}
            state.persist_annotations()
        return {"ok": True, "count": len(state.annotations)}

    @app.put("/annotations/{model_id:path}")
    def put_annotation(model_id: str, entry: AnnotationEntry):
        with state.lock:
            state.annotations[model_id] = entry.model_dump()
            state.persist_annotations()
        return {"ok": True}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _compatible_models(loaded: LoadedProgram, selection_text: str, cap: int) -> Optional[list[str]]:
    """Node ids whose bindings contain every binding of the partial selection."""
    try:
        g = loaded.model_graph(cap=cap)
    except CapExceeded:
        return None
    try:
        from .selections import parse_selection

        spec = parse_selection(selection_text)
    except SelectionError:
        return None
    if loaded.core is not None:
        partial = {b.hole: b.payload() for b in spec}
        out = []
        for n in g.nodes:
            bound = dict(n.items())
            if all(bound.get(h) == i for h, i in partial.items()):
                out.append(n.canonical())
        return out
    # macro programs: compare through the user-facing form
    out = []
    partial_txt = {b.hole: b for b in spec}
    for n in g.nodes:
        msel = loaded.macro.inverse_translate(n)
        plain = msel.plain_map()
        subsets = {r: {m.canonical() for m in ms} for r, ms in msel.subsets}
        match = True
        for hole, b in partial_txt.items():
            if b.subset is not None:
                want = {"(" + ",".join(str(a) for a in m) + ")" if len(m) > 1 else str(m[0]) for m in b.subset}
                if subsets.get(hole) != want:
                    match = False
                    break
            elif plain.get(hole) != b.payload():
                match = False
                break
        if match:
            out.append(loaded.display_selection(n))
    return out
