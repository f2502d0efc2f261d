"""Command-line interface.

Exit codes: 0 on success, 1 when the program or selection is rejected,
2 on I/O errors (missing files, unwritable output).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .api import LoadedProgram, load_program
from .checks import Diagnostic, diagnostics_json
from .graphs import CapExceeded, export_graph
from .inline import ConcretizeError
from .macros import MacroError, symbolic_count
from .parser import ParseError
from .search import external_scorer, greedy_search, parameter_count_scorer
from .selections import SelectionError
from .tokens import LexError


def _read_source(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        print(f"error: cannot read {path}: {e}", file=sys.stderr)
        raise SystemExit(2)


def _write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as e:
        print(f"error: cannot write {out}: {e}", file=sys.stderr)
        raise SystemExit(2)


def _load(path: str, as_json: bool) -> LoadedProgram:
    text = _read_source(path)
    try:
        return load_program(text)
    except (ParseError, LexError) as e:
        if as_json:
            span = {"line": getattr(e, "line", 0), "col": getattr(e, "col", 0), "len": 0}
            print(json.dumps([{"code": "PARSE_ERROR", "span": span, "message": str(e)}]), file=sys.stderr)
        else:
            print(f"parse error: {e}", file=sys.stderr)
        raise SystemExit(1)
    except MacroError as e:
        print(f"macro error: {e}", file=sys.stderr)
        raise SystemExit(1)


def _report_diags(diags: list[Diagnostic], as_json: bool) -> None:
    if as_json:
        print(diagnostics_json(diags), file=sys.stderr)
    else:
        for d in diags:
            print(str(d), file=sys.stderr)


def cmd_check(args) -> int:
    loaded = _load(args.file, args.json)
    result = loaded.check()
    if result.diagnostics:
        _report_diags(result.diagnostics, args.json)
        return 1
    if not args.json:
        kind = "macro program" if loaded.is_macro else "program"
        print(f"ok: {kind} is valid")
    else:
        print(json.dumps({"ok": True}))
    return 0


def cmd_concretize(args) -> int:
    loaded = _load(args.file, args.json)
    try:
        sel = loaded.selection(args.selection)
        violations = loaded.selection_violations(sel)
        if violations:
            raise SelectionError("; ".join(violations))
        text = loaded.concretize_text(sel)
    except (SelectionError, ConcretizeError, MacroError) as e:
        if args.json:
            print(json.dumps({"code": getattr(e, "code", "INVALID_SELECTION"), "message": str(e)}), file=sys.stderr)
        else:
            print(f"error: {e}", file=sys.stderr)
        return 1
    _write_output(text, args.output)
    return 0


def cmd_graph(args) -> int:
    loaded = _load(args.file, args.json)
    if args.nodes_only:
        if loaded.is_macro:
            count = loaded.node_count()
            if count > args.cap:
                payload = {"count": symbolic_count(count)}
                _write_output(json.dumps(payload, indent=2) + "\n", args.output)
                return 0
            g = loaded.model_graph(cap=args.cap)
            ids = [loaded.display_selection(n) for n in g.nodes]
        else:
            from .graphs import model_graph_nodes_only

            nodes = model_graph_nodes_only(loaded.core)
            if len(nodes) > args.cap:
                _write_output(json.dumps({"count": len(nodes)}, indent=2) + "\n", args.output)
                return 0
            ids = [n.canonical() for n in nodes.selections()]
        if args.format == "json":
            _write_output(json.dumps({"nodes": ids}, indent=2) + "\n", args.output)
        else:
            _write_output("\n".join(ids) + "\n", args.output)
        return 0
    try:
        g = loaded.model_graph(cap=args.cap)
    except CapExceeded as e:
        print(f"error: {e}; rerun with --nodes-only or a higher --cap", file=sys.stderr)
        return 1
    if loaded.is_macro:
        # re-express node identities in user-facing selection strings
        rename = {n.canonical(): loaded.display_selection(n) for n in g.nodes}
        if args.format == "json":
            payload = json.loads(g.to_json())
            for node in payload["nodes"]:
                node["id"] = rename[node["id"]]
            for edge in payload["edges"]:
                edge["a"] = rename[edge["a"]]
                edge["b"] = rename[edge["b"]]
            _write_output(json.dumps(payload, indent=2) + "\n", args.output)
        else:
            lines = ["graph models {"]
            for n in g.nodes:
                lines.append(f'  "{rename[n.canonical()]}";')
            for e in g.edges:
                lines.append(
                    f'  "{rename[e.a.canonical()]}" -- "{rename[e.b.canonical()]}" [label="{e.hole}"];'
                )
            lines.append("}")
            _write_output("\n".join(lines) + "\n", args.output)
        return 0
    _write_output(export_graph(g, args.format), args.output)
    return 0


def cmd_module_graph(args) -> int:
    loaded = _load(args.file, args.json)
    mg = loaded.module_graph()
    _write_output(mg.to_json() + "\n" if args.format == "json" else mg.to_dot(), args.output)
    return 0


def cmd_neighbors(args) -> int:
    loaded = _load(args.file, args.json)
    try:
        sel = loaded.selection(args.selection)
        violations = loaded.selection_violations(sel)
        if violations:
            raise SelectionError("; ".join(violations))
        neighbors = loaded.neighbors(sel)
    except (SelectionError, MacroError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    ids = [n.canonical() for n in neighbors]
    if args.format == "json":
        _write_output(json.dumps({"neighbors": ids}, indent=2) + "\n", args.output)
    else:
        _write_output("\n".join(ids) + "\n", args.output)
    return 0


def cmd_count(args) -> int:
    loaded = _load(args.file, args.json)
    if loaded.is_macro:
        counts = loaded.macro.member_counts()
        payload = {
            "members": counts,
            "totalMembers": sum(counts.values()),
            "models": symbolic_count(loaded.node_count()),
        }
    else:
        payload = {"models": loaded.node_count()}
    _write_output(json.dumps(payload, indent=2) + "\n", args.output)
    return 0


def _build_scorer(args):
    if args.scorer_cmd:
        return external_scorer(args.scorer_cmd, timeout=args.scorer_timeout)
    return parameter_count_scorer()


def cmd_search(args) -> int:
    loaded = _load(args.file, args.json)
    try:
        start = loaded.selection(args.start) if args.start else loaded.default_start()
        violations = loaded.selection_violations(start)
        if violations:
            raise SelectionError("; ".join(violations))
    except (SelectionError, MacroError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    scorer = _build_scorer(args)
    trace = greedy_search(loaded, start, scorer)
    if trace.aborted:
        print(f"error: search aborted: {trace.aborted}", file=sys.stderr)
        _write_output(json.dumps(trace.to_dict(), indent=2) + "\n", args.output)
        return 1
    _write_output(json.dumps(trace.to_dict(), indent=2) + "\n", args.output)
    return 0


def cmd_report(args) -> int:
    """Write the delimited summaries and rendered figures for one program."""
    loaded = _load(args.file, args.json)
    outdir = Path(args.output or "report")
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"error: cannot create {outdir}: {e}", file=sys.stderr)
        return 2
    try:
        g = loaded.model_graph(cap=args.cap)
    except CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    ids = {n.canonical(): loaded.display_selection(n) for n in g.nodes}

    (outdir / "model_graph.json").write_text(g.to_json(), encoding="utf-8")
    (outdir / "module_graph.dot").write_text(loaded.module_graph().to_dot(), encoding="utf-8")
    with (outdir / "nodes.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["id", "bindings"])
        for n in g.nodes:
            w.writerow([ids[n.canonical()], len(n)])
    with (outdir / "edges.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["a", "b", "hole", "impl_a", "impl_b"])
        for e in g.edges:
            w.writerow([ids[e.a.canonical()], ids[e.b.canonical()], e.hole, e.impls[0], e.impls[1]])

    trace = None
    if args.score:
        start = loaded.selection(args.start) if args.start else loaded.default_start()
        scorer = _build_scorer(args)
        trace = greedy_search(loaded, start, scorer)
        with (outdir / "search_trace.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["order", "selection", "score"])
            for k, (sel, score) in enumerate(trace.visited):
                w.writerow([k, sel, score])

    _render_figures(g, ids, trace, outdir)
    print(f"report written to {outdir}/")
    return 0


def _render_figures(g, ids, trace, outdir: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import networkx as nx

    nxg = nx.Graph()
    for n in g.nodes:
        nxg.add_node(n.canonical())
    for e in g.edges:
        nxg.add_edge(e.a.canonical(), e.b.canonical(), hole=e.hole)
    pos = nx.spring_layout(nxg, seed=7)

    fig, ax = plt.subplots(figsize=(9, 7))
    nx.draw_networkx_edges(nxg, pos, ax=ax, edge_color="#b0b0b0")
    path_nodes = set(trace.path) if trace else set()
    colors = ["#d62728" if ids[n] in path_nodes or n in path_nodes else "#1f77b4" for n in nxg.nodes]
    nx.draw_networkx_nodes(nxg, pos, ax=ax, node_size=160, node_color=colors)
    if len(nxg) <= 60:
        nx.draw_networkx_labels(nxg, pos, ax=ax, labels={n: ids[n] for n in nxg.nodes}, font_size=5)
    if trace and len(trace.path) > 1:
        path = [p for p in trace.path]
        inv = {v: k for k, v in ids.items()}
        chain = [inv.get(p, p) for p in path]
        edges = list(zip(chain, chain[1:]))
        nx.draw_networkx_edges(nxg, pos, ax=ax, edgelist=edges, edge_color="#d62728", width=2.2)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(outdir / "model_graph.png", dpi=150)
    plt.close(fig)

    if trace:
        fig, ax = plt.subplots(figsize=(7, 4))
        scores = [s for _, s in trace.visited]
        ax.plot(range(len(scores)), scores, marker="o", lw=1)
        ax.set_xlabel("evaluation")
        ax.set_ylabel("score")
        ax.set_title("greedy search evaluations")
        fig.tight_layout()
        fig.savefig(outdir / "search_scores.png", dpi=150)
        plt.close(fig)


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    source = _read_source(args.file) if args.file else None
    ui_dir = args.ui
    if ui_dir is not None and not Path(ui_dir).is_dir():
        print(f"error: --ui directory {ui_dir} does not exist", file=sys.stderr)
        return 2
    app = create_app(source=source, source_path=args.file, cap=args.cap, ui_dir=ui_dir)
    if ui_dir is not None:
        print(f"explorer at http://{args.host}:{args.port}/ui/")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modstan", description="Multi-model program compiler and model-space tools")
    p.add_argument("--json", action="store_true", help="machine-readable diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, selection=False):
        sp.add_argument("file", help="program file (.mstan)")
        if selection:
            sp.add_argument("selection", help="selection string, e.g. 'Mean:normal,Stddev:standard'")
        sp.add_argument("-o", "--output", default=None, help="output file (default stdout)")

    sp = sub.add_parser("check", help="parse and validate a program")
    sp.add_argument("file")
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("concretize", help="synthesize the program a selection picks")
    common(sp, selection=True)
    sp.set_defaults(fn=cmd_concretize)

    sp = sub.add_parser("graph", help="enumerate the model graph")
    common(sp)
    sp.add_argument("--format", choices=("dot", "json"), default="json")
    sp.add_argument("--nodes-only", action="store_true")
    sp.add_argument("--cap", type=int, default=5000)
    sp.set_defaults(fn=cmd_graph)

    sp = sub.add_parser("module-graph", help="export the module graph")
    common(sp)
    sp.add_argument("--format", choices=("dot", "json"), default="json")
    sp.set_defaults(fn=cmd_module_graph)

    sp = sub.add_parser("neighbors", help="list selections one swap away")
    common(sp, selection=True)
    sp.add_argument("--format", choices=("text", "json"), default="text")
    sp.set_defaults(fn=cmd_neighbors)

    sp = sub.add_parser("count", help="member and model counts without materialization")
    common(sp)
    sp.set_defaults(fn=cmd_count)

    sp = sub.add_parser("search", help="greedy search over the model graph")
    common(sp)
    sp.add_argument("--start", default=None, help="starting selection (default: first impl per hole)")
    sp.add_argument("--scorer-cmd", default=None, help="external scorer; {file} is the concrete program")
    sp.add_argument("--scorer-timeout", type=float, default=None)
    sp.set_defaults(fn=cmd_search)

    sp = sub.add_parser("report", help="write graph CSV/JSON plus rendered figures")
    common(sp)
    sp.add_argument("--cap", type=int, default=5000)
    sp.add_argument("--score", action="store_true", help="also run the greedy search")
    sp.add_argument("--start", default=None)
    sp.add_argument("--scorer-cmd", default=None)
    sp.add_argument("--scorer-timeout", type=float, default=None)
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("file", nargs="?", default=None)
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--cap", type=int, default=5000)
    sp.add_argument("--ui", default=None, help="directory with the built explorer (frontend/)")
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit as e:
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
