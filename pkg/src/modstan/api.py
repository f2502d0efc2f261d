"""Facade tying the pipeline together for the CLI, the HTTP service and tests.

`load_program` parses source text and returns a `LoadedProgram` that answers
the common questions uniformly whether or not the program uses macros:
validation, selection handling, concretization, model-graph construction,
neighbor enumeration and search navigation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .checks import CheckResult, Diagnostic, check_program
from .graphs import (
    CapExceeded,
    ModelGraphResult,
    model_graph,
    model_graph_nodes_only,
    model_neighbors,
    naive_model_graph,
)
from .inline import concretize
from .macros import (
    CapExceededMembers,
    MacroProgram,
    MacroSelection,
    program_has_macros,
)
from .parser import parse
from .program import ModularProgram, ModuleGraph, Selection, module_graph
from .render import render
from .selections import parse_selection
from .syntax import Program
from .tokens import LexError


class LoadError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class LoadedProgram:
    source: str
    program: Program
    core: Optional[ModularProgram]
    macro: Optional[MacroProgram]

    @property
    def is_macro(self) -> bool:
        return self.macro is not None

    # -- validation ---------------------------------------------------------

    def check(self) -> CheckResult:
        if self.core is not None:
            return check_program(self.core)
        # macro programs: validate the full expansion when small; above the
        # cap, validate a truncated probe expansion (a few members per macro
        # hole), which still typechecks every template
        try:
            expanded, _space = self.macro.expand_full()
        except CapExceededMembers:
            expanded, _space = self.macro.expand_full(per_unit_limit=2)
        return check_program(expanded)

    # -- selections ----------------------------------------------------------

    def selection(self, text: str) -> Union[Selection, MacroSelection]:
        spec = parse_selection(text)
        if self.core is not None:
            return self.core.resolve_selection(spec)
        return self.macro.resolve_selection(spec)

    def selection_violations(self, sel) -> list[str]:
        if self.core is not None:
            return self.core.valid_selection(sel).violations()
        return self.macro.validate_selection(sel)

    def default_start(self) -> Union[Selection, MacroSelection]:
        """Lexicographically first implementation for every reachable hole;
        collection holes start from the empty subset."""
        if self.core is not None:
            chosen: dict[str, str] = {}
            frontier = sorted(self.core.base_holes())
            seen = set(frontier)
            while frontier:
                h = frontier.pop()
                impls = self.core.hole_impls(h)
                if not impls:
                    continue
                chosen[h] = impls[0]
                for h2 in self.core.impl_holes(h, impls[0]):
                    if h2 not in seen:
                        seen.add(h2)
                        frontier.append(h2)
            return Selection(chosen)
        plain: dict[str, str] = {}
        subsets: dict[str, tuple] = {}
        mp = self.macro
        frontier = sorted(mp.base_units)
        seen = set(frontier)
        while frontier:
            name = frontier.pop()
            u = mp.units[name]
            if u.kind == "collection":
                subsets[name] = ()
                continue
            impls = mp.unit_impls(name)
            if not impls:
                continue
            plain[name] = impls[0]
            for h2 in mp.unit_impl_holes(name, impls[0], include_members=False):
                if h2 not in seen:
                    seen.add(h2)
                    frontier.append(h2)
        return MacroSelection(tuple(sorted(plain.items())), tuple(sorted(subsets.items())))

    # -- concretization ---------------------------------------------------------

    def concretize_selection(self, sel) -> Program:
        if self.core is not None:
            return concretize(self.core, sel)
        return self.macro.concretize(sel)

    def concretize_text(self, sel) -> str:
        return render(self.concretize_selection(sel))

    # -- graphs -------------------------------------------------------------------

    def module_graph(self) -> ModuleGraph:
        if self.core is not None:
            return module_graph(self.core)
        space = self.macro.skeleton_space()
        nodes = [("base", "base")]
        edges = []
        for name in space.all_holes():
            nodes.append((name, "hole"))
        for name in sorted(space.base_holes()):
            edges.append(("base", name))
        for name in space.all_holes():
            u = self.macro.units[name]
            if u.kind in ("collection", "choice"):
                impl_ids = [f"{name}:<{u.members.count()} members>"]
                kinds = [(impl_ids[0], "impl")]
                nodes.extend(kinds)
                edges.append((name, impl_ids[0]))
                continue
            for impl in space.hole_impls(name):
                node_id = f"{name}:{impl}"
                nodes.append((node_id, "impl"))
                edges.append((name, node_id))
                for h2 in sorted(space.impl_holes(name, impl)):
                    edges.append((f"{name}:{impl}", h2))
        return ModuleGraph(tuple(nodes), tuple(edges))

    def model_graph(self, cap: int = 5000) -> ModelGraphResult:
        """Materialized model graph; raises CapExceeded above `cap` nodes."""
        if self.core is not None:
            count = len(model_graph_nodes_only(self.core))
            if count > cap:
                raise CapExceeded(count, cap)
            return model_graph(self.core)
        count = self.macro.node_count()
        if count > cap:
            raise CapExceeded(count, cap)
        return model_graph(self.macro.unit_space())

    def node_count(self) -> int:
        if self.core is not None:
            return len(model_graph_nodes_only(self.core))
        return self.macro.node_count()

    def display_selection(self, sel: Selection) -> str:
        """User-facing string for a node of the materialized model graph."""
        if self.core is not None:
            return sel.canonical()
        return self.macro.inverse_translate(sel).canonical()

    # -- navigation (shared by search, CLI, service) ---------------------------------

    def neighbors(self, sel) -> list:
        if self.core is not None:
            return list(model_neighbors(self.core, sel))
        return self.macro.neighbors(sel)

    def naive_model_graph(self, cap: int = 1_000_000) -> ModelGraphResult:
        if self.core is not None:
            return naive_model_graph(self.core, cap)
        return naive_model_graph(self.macro.unit_space(), cap)


def load_program(text: str) -> LoadedProgram:
    program = parse(text)
    if program_has_macros(program):
        return LoadedProgram(text, program, core=None, macro=MacroProgram(program))
    return LoadedProgram(text, program, core=ModularProgram(program), macro=None)
