"""Macro layer: collections, indexed holes, instances, copies and products.

Macros are shorthand for larger module programs. Instance and copy tags
(`h<1>`, `h<<2>>`) are expanded eagerly because they are explicit and small:
each tagged reference becomes a fresh hole whose implementations are renamed
copies of the original's. Collections (`H+`), indexed holes (`H[1..100]`)
and hole products (`H1*H2`) stay symbolic: members are counted and named
arithmetically and synthesized as real module implementations only when a
selection actually picks them. An instantiation counter records every
synthesized implementation so laziness is observable.

Selection handling follows the translations of the macro layer: a collection
subset `h:[a,c]` stands for `h:merge_h` plus `h_a:yes, h_b:no, h_c:yes` over
the synthesized member holes; an instance family binding `h:i` fans out to
every instance copy; copy holes are bound independently.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import combinations, permutations, product
from typing import Iterator, Optional, Sequence, Union

from .program import ModularProgram, Selection
from .selections import SelectionError, SelectionSpec, render_member
from .syntax import (
    ArrayLit,
    Block,
    Call,
    CallStmt,
    TupleLit,
    DeclStmt,
    Expr,
    FieldDecl,
    HoleCall,
    HoleRef,
    HoleTerm,
    ImplDecl,
    IndexAtom,
    InstanceTag,
    IntLit,
    Param,
    Program,
    RangeAtom,
    ReturnStmt,
    Stmt,
    SymAtom,
    Var,
)
from .graphs import limit, model_graph_nodes_only
from .walk import iter_hole_calls, map_stmt_exprs, substitute, substitute_stmt

Atom = Union[int, str]


class MacroError(Exception):
    def __init__(self, message: str, code: str = "MACRO_ERROR"):
        super().__init__(message)
        self.code = code


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]+", "_", name).strip("_")


def program_has_macros(program: Program) -> bool:
    def scan(stmts) -> bool:
        return any(not hc.ref.is_plain for hc in iter_hole_calls(tuple(stmts)))

    for b in program.blocks:
        if b.kind == "functions":
            if any(scan(f.body) for f in b.stmts):
                return True
        elif scan(b.stmts):
            return True
    for impl in program.impls:
        if impl.range_index_params or impl.inst_index_params:
            return True
        for f in impl.fields:
            body = list(f.body)
            if f.ret is not None:
                body.append(ReturnStmt(f.ret))
            if scan(body):
                return True
        for ab in impl.append_blocks:
            if ab.kind != "functions" and scan(ab.stmts):
                return True
    return False


# ---------------------------------------------------------------------------
# Ranges
# ---------------------------------------------------------------------------


def range_atom_tuples(atom: RangeAtom) -> list[tuple[int, ...]]:
    values = list(range(atom.lo, atom.hi + 1))
    if atom.exp == 1 and not atom.mode:
        return [(v,) for v in values]
    if atom.mode == "":
        return [tuple(t) for t in product(values, repeat=atom.exp)]
    if atom.mode == "P":
        return [tuple(t) for t in permutations(values, atom.exp)]
    if atom.mode == "C":
        return [tuple(t) for t in combinations(values, atom.exp)]
    raise MacroError(f"malformed range exponent mode {atom.mode!r}")


def range_atom_count(atom: RangeAtom) -> int:
    c = atom.hi - atom.lo + 1
    if atom.exp == 1 and not atom.mode:
        return c
    if atom.mode == "":
        return c**atom.exp
    if atom.mode == "P":
        return math.perm(c, atom.exp)
    if atom.mode == "C":
        return math.comb(c, atom.exp)
    raise MacroError(f"malformed range exponent mode {atom.mode!r}")


def range_atom_contains(atom: RangeAtom, idx: tuple[int, ...]) -> bool:
    width = 1 if (atom.exp == 1 and not atom.mode) else atom.exp
    if len(idx) != width:
        return False
    if not all(atom.lo <= v <= atom.hi for v in idx):
        return False
    if atom.mode == "P" and len(set(idx)) != len(idx):
        return False
    if atom.mode == "C" and list(idx) != sorted(set(idx)):
        return False
    return True


def _atom_width(atom: IndexAtom) -> int:
    if isinstance(atom, SymAtom):
        raise MacroError(f"symbolic index {atom.name!r} outside a module template")
    return 1 if (atom.exp == 1 and not atom.mode) else atom.exp


def expand_ranges(atoms: Sequence[IndexAtom]) -> list[tuple[int, ...]]:
    """All index tuples of a bracket payload (Cartesian product of its atoms)."""
    lists = []
    for a in atoms:
        if isinstance(a, SymAtom):
            raise MacroError(f"symbolic index {a.name!r} outside a module template")
        lists.append(range_atom_tuples(a))
    out: list[tuple[int, ...]] = []
    for combo in product(*lists):
        flat: tuple[int, ...] = ()
        for part in combo:
            flat += part
        out.append(flat)
    return out


def ranges_count(atoms: Sequence[IndexAtom]) -> int:
    n = 1
    for a in atoms:
        if isinstance(a, SymAtom):
            raise MacroError(f"symbolic index {a.name!r} outside a module template")
        n *= range_atom_count(a)
    return n


def ranges_contain(atoms: Sequence[IndexAtom], idx: tuple[int, ...]) -> bool:
    pos = 0
    for a in atoms:
        if isinstance(a, SymAtom):
            return False
        w = _atom_width(a)
        if pos + w > len(idx) or not range_atom_contains(a, idx[pos : pos + w]):
            return False
        pos += w
    return pos == len(idx)


# ---------------------------------------------------------------------------
# Member sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemberKey:
    parts: tuple[Atom, ...]

    def canonical(self) -> str:
        return render_member(self.parts)

    def hole_suffix(self) -> str:
        return "_".join(str(p) for p in self.parts)


class TermMembers:
    """Members contributed by one hole term (one operand of a product)."""

    def __init__(self, unit: "MacroProgram", term: HoleTerm):
        self.unit = unit
        self.term = term
        self.templates = unit.program_impls.get(term.name, {})
        if not self.templates:
            raise MacroError(f"hole {term.name} has no implementations", code="UNFILLED_HOLE")
        self.indexed = bool(term.ranges)
        names = sorted(self.templates)
        if self.indexed:
            arity = sum(_atom_width(a) for a in term.ranges)
            for n in names:
                t = self.templates[n]
                if len(t.range_index_params) != arity:
                    raise MacroError(
                        f'template "{n}" of {term.name} takes {len(t.range_index_params)} '
                        f"indices, site supplies {arity}"
                    )
        self.template_names = names
        self.multi_template = len(names) > 1

    def base_count(self) -> int:
        if not self.indexed:
            return len(self.template_names)
        return ranges_count(self.term.ranges) * len(self.template_names)

    def count(self) -> int:
        c = self.base_count()
        if self.term.exp == 1 and not self.term.exp_mode:
            return c
        if self.term.exp_mode == "":
            return c**self.term.exp
        if self.term.exp_mode == "P":
            return math.perm(c, self.term.exp)
        if self.term.exp_mode == "C":
            return math.comb(c, self.term.exp)
        raise MacroError(f"malformed hole exponent {self.term.exp_mode!r}")

    def iter_base(self) -> Iterator[tuple[Atom, ...]]:
        if not self.indexed:
            for n in self.template_names:
                yield (n,)
            return
        for idx in expand_ranges(self.term.ranges):
            if self.multi_template:
                for n in self.template_names:
                    yield (n,) + idx
            else:
                yield idx

    def iter_keys(self) -> Iterator[tuple[Atom, ...]]:
        if self.term.exp == 1 and not self.term.exp_mode:
            yield from self.iter_base()
            return
        base = list(self.iter_base())
        if self.term.exp_mode == "":
            combos: Iterator = product(base, repeat=self.term.exp)
        elif self.term.exp_mode == "P":
            combos = permutations(base, self.term.exp)
        else:
            combos = combinations(base, self.term.exp)
        for c in combos:
            flat: tuple[Atom, ...] = ()
            for part in c:
                flat += part
            yield flat

    def base_width(self) -> int:
        if not self.indexed:
            return 1
        return sum(_atom_width(a) for a in self.term.ranges) + (1 if self.multi_template else 0)

    def width(self) -> int:
        reps = self.term.exp if (self.term.exp != 1 or self.term.exp_mode) else 1
        return self.base_width() * reps

    def contains_base(self, key: tuple[Atom, ...]) -> bool:
        if not self.indexed:
            return len(key) == 1 and key[0] in self.templates
        idx = key
        if self.multi_template:
            if not key or key[0] not in self.templates:
                return False
            idx = key[1:]
        if not all(isinstance(p, int) for p in idx):
            return False
        return ranges_contain(self.term.ranges, tuple(idx))  # type: ignore[arg-type]

    def contains(self, key: tuple[Atom, ...]) -> bool:
        reps = self.term.exp if (self.term.exp != 1 or self.term.exp_mode) else 1
        if reps == 1:
            return self.contains_base(key)
        w = self.base_width()
        if len(key) != w * reps:
            return False
        parts = [key[i * w : (i + 1) * w] for i in range(reps)]
        if not all(self.contains_base(p) for p in parts):
            return False
        if self.term.exp_mode == "P" and len(set(parts)) != len(parts):
            return False
        if self.term.exp_mode == "C" and parts != sorted(set(parts)):
            return False
        return True

    def base_impl(self, key: tuple[Atom, ...]) -> tuple[ImplDecl, tuple[int, ...]]:
        """Template declaration plus the index tuple for one base member."""
        if not self.indexed:
            return self.templates[key[0]], ()
        if self.multi_template or isinstance(key[0], str):
            return self.templates[key[0]], tuple(key[1:])  # type: ignore[arg-type]
        return self.templates[self.template_names[0]], tuple(key)  # type: ignore[arg-type]


class MemberSet:
    """All members of one macro-decorated hole (possibly a product)."""

    def __init__(self, unit: "MacroProgram", ref: HoleRef):
        self.ref = ref
        self.terms = [TermMembers(unit, t) for t in ref.terms]

    def count(self) -> int:
        n = 1
        for t in self.terms:
            n *= t.count()
        return n

    def iter_keys(self) -> Iterator[MemberKey]:
        lists = [t.iter_keys() for t in self.terms]
        if len(self.terms) == 1:
            for key in lists[0]:
                yield MemberKey(key)
            return
        materialized = [list(t.iter_keys()) for t in self.terms]
        for combo in product(*materialized):
            flat: tuple[Atom, ...] = ()
            for part in combo:
                flat += part
            yield MemberKey(flat)

    def contains(self, key: MemberKey) -> bool:
        pos = 0
        for t in self.terms:
            w = t.width()
            if pos + w > len(key.parts) or not t.contains(key.parts[pos : pos + w]):
                return False
            pos += w
        return pos == len(key.parts)

    def resolve(self, key: MemberKey) -> Optional[MemberKey]:
        """Canonical form of a user-written member, or None when unknown.

        Single-template indexed members canonically use bare indices, but the
        template-qualified form `f[5]` is accepted and stripped."""
        if self.contains(key):
            return key
        if len(self.terms) == 1:
            t = self.terms[0]
            if (
                t.indexed
                and not t.multi_template
                and key.parts
                and key.parts[0] == t.template_names[0]
            ):
                stripped = MemberKey(tuple(key.parts[1:]))
                if self.contains(stripped):
                    return stripped
        return None

    def split(self, key: MemberKey) -> list[tuple[Atom, ...]]:
        out = []
        pos = 0
        for t in self.terms:
            w = t.width()
            out.append(key.parts[pos : pos + w])
            pos += w
        return out


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------


@dataclass
class Unit:
    kind: str  # plain | family | copy | choice | collection
    name: str  # user-facing selection key
    hole: str = ""  # underlying hole for plain/family/copy
    instances: tuple[str, ...] = ()  # core hole names for family units
    members: Optional[MemberSet] = None  # for choice (indexed/product) and collection
    ref: Optional[HoleRef] = None
    args: tuple[Expr, ...] = ()


MERGE_PREFIX = "merge_"


def member_hole_name(root: str, key: MemberKey) -> str:
    return f"{root}_{key.hole_suffix()}"


@dataclass(frozen=True)
class MacroSelection:
    plain: tuple[tuple[str, str], ...]  # sorted (unit, impl key)
    subsets: tuple[tuple[str, tuple[MemberKey, ...]], ...]  # sorted roots, sorted members

    def canonical(self) -> str:
        parts = {u: i for u, i in self.plain}
        rendered = {u: i for u, i in parts.items()}
        for root, members in self.subsets:
            rendered[root] = "[" + ",".join(m.canonical() for m in members) + "]"
        return ",".join(f"{u}:{rendered[u]}" for u in sorted(rendered))

    def plain_map(self) -> dict[str, str]:
        return dict(self.plain)

    def subset_map(self) -> dict[str, tuple[MemberKey, ...]]:
        return dict(self.subsets)

    def with_plain(self, unit: str, impl: str) -> "MacroSelection":
        d = dict(self.plain)
        d[unit] = impl
        return MacroSelection(tuple(sorted(d.items())), self.subsets)

    def flip_member(self, root: str, key: MemberKey) -> "MacroSelection":
        d = dict(self.subsets)
        current = set(d.get(root, ()))
        if key in current:
            current.discard(key)
        else:
            current.add(key)
        d[root] = tuple(sorted(current, key=lambda m: m.parts))
        return MacroSelection(self.plain, tuple(sorted(d.items())))


# ---------------------------------------------------------------------------
# Implementation copying and index substitution
# ---------------------------------------------------------------------------


def _map_impl_stmts(decl: ImplDecl, fn) -> ImplDecl:
    fields = tuple(
        FieldDecl(
            f.name,
            f.params,
            f.obs_params,
            tuple(map_stmt_exprs(s, fn) for s in f.body),
            _map_ret(f.ret, fn),
        )
        for f in decl.fields
    )
    appends = tuple(
        ab if ab.kind == "functions" else Block(ab.kind, tuple(map_stmt_exprs(s, fn) for s in ab.stmts))
        for ab in decl.append_blocks
    )
    return ImplDecl(
        decl.impl_name,
        decl.hole_name,
        fields,
        appends,
        decl.range_index_params,
        decl.inst_index_params,
        decl.span,
    )


def _map_ret(ret: Optional[Expr], fn) -> Optional[Expr]:
    if ret is None:
        return None
    wrapped = map_stmt_exprs(ReturnStmt(ret), fn)
    return wrapped.value


def _substitute_indices(decl: ImplDecl, mapping: dict[str, int]) -> ImplDecl:
    """Replace index parameters with integer literals, in expressions and
    inside instance/copy tags of nested hole references."""
    exprs = {name: IntLit(v) for name, v in mapping.items()}

    def subst_atoms(atoms: tuple[IndexAtom, ...]) -> tuple[IndexAtom, ...]:
        out: list[IndexAtom] = []
        for a in atoms:
            if isinstance(a, SymAtom) and a.name in mapping:
                v = mapping[a.name]
                out.append(RangeAtom(v, v))
            else:
                out.append(a)
        return tuple(out)

    def fn(e: Expr):
        if isinstance(e, Var) and e.name in exprs:
            return exprs[e.name]
        if isinstance(e, HoleCall):
            ref = e.ref
            terms = tuple(
                HoleTerm(t.name, subst_atoms(t.ranges), t.exp, t.exp_mode) for t in ref.terms
            )
            inst = None
            if ref.inst is not None:
                inst = InstanceTag(ref.inst.kind, subst_atoms(ref.inst.atoms))
            new_ref = HoleRef(terms, ref.field_name, inst, ref.collect)
            if new_ref != ref:
                return HoleCall(new_ref, e.args, e.span)
        return None

    out = _map_impl_stmts(decl, fn)
    return ImplDecl(
        out.impl_name,
        out.hole_name,
        out.fields,
        out.append_blocks,
        (),  # index parameters are consumed by the substitution
        (),
        out.span,
    )


def _rename_globals(decl: ImplDecl, suffix: str) -> ImplDecl:
    """Suffix local and append-block declarations (and their uses) of a copy."""
    renames: dict[str, Expr] = {}
    for ab in decl.append_blocks:
        if ab.kind == "functions":
            continue
        for s in ab.stmts:
            if isinstance(s, DeclStmt):
                renames[s.name] = Var(f"{s.name}{suffix}")
    for f in decl.fields:
        for s in f.body:
            if isinstance(s, DeclStmt):
                renames[s.name] = Var(f"{s.name}{suffix}")
    if not renames:
        return decl

    def fn(e: Expr):
        if isinstance(e, Var) and e.name in renames:
            return renames[e.name]
        return None

    def fix_decls(stmts: tuple[Stmt, ...]) -> tuple[Stmt, ...]:
        out = []
        for s in stmts:
            s = map_stmt_exprs(s, fn)
            if isinstance(s, DeclStmt) and s.name in renames:
                s = DeclStmt(s.ty, renames[s.name].name, s.init, s.span)
            out.append(s)
        return tuple(out)

    fields = tuple(
        FieldDecl(f.name, f.params, f.obs_params, fix_decls(f.body), _map_ret(f.ret, fn))
        for f in decl.fields
    )
    appends = tuple(
        ab if ab.kind == "functions" else Block(ab.kind, fix_decls(tuple(ab.stmts)))
        for ab in decl.append_blocks
    )
    return ImplDecl(
        decl.impl_name,
        decl.hole_name,
        fields,
        appends,
        decl.range_index_params,
        decl.inst_index_params,
        decl.span,
    )


# ---------------------------------------------------------------------------
# The macro program
# ---------------------------------------------------------------------------


class MacroProgram:
    """A program with macro decorations, expanded lazily."""

    def __init__(self, program: Program):
        self.original = program
        self.instantiations = 0
        self.program_impls: dict[str, dict[str, ImplDecl]] = {}
        for decl in program.impls:
            self.program_impls.setdefault(decl.hole_name, {})[decl.impl_name] = decl
        self.synth: dict[tuple[str, str], ImplDecl] = {}
        self.families: dict[str, list[str]] = {}
        self.units: dict[str, Unit] = {}
        self._norm_impl_cache: dict[tuple[str, str], ImplDecl] = {}
        self._expand_instances()
        self._build_units()

    # -- step 1: instances and copies ---------------------------------------

    def _instance_hole_name(self, hole: str, idx: tuple[int, ...], kind: str) -> str:
        body = ",".join(str(v) for v in idx)
        return f"{hole}<<{body}>>" if kind == "copy" else f"{hole}<{body}>"

    def _expand_instances(self) -> None:
        needed: list[tuple[str, tuple[int, ...], str]] = []
        seen: set[tuple[str, tuple[int, ...], str]] = set()

        def rewrite_fn(e: Expr):
            if not isinstance(e, HoleCall) or e.ref.inst is None:
                return None
            ref = e.ref
            if len(ref.terms) != 1 or ref.collect or ref.terms[0].ranges:
                raise MacroError(f"instance tag cannot combine with other decorations: {ref.render()}")
            if any(isinstance(a, SymAtom) for a in ref.inst.atoms):
                return None  # symbolic: substituted when the template materializes
            hole = ref.terms[0].name
            tuples = expand_ranges(ref.inst.atoms)
            calls = []
            for idx in tuples:
                name = self._instance_hole_name(hole, idx, ref.inst.kind)
                key = (hole, idx, ref.inst.kind)
                if key not in seen:
                    seen.add(key)
                    needed.append(key)
                calls.append(HoleCall(HoleRef((HoleTerm(name),), ref.field_name), e.args, e.span))
            if len(calls) == 1:
                return calls[0]
            return ArrayLit(tuple(calls))

        def rewrite_stmts(stmts):
            return tuple(map_stmt_exprs(s, rewrite_fn) for s in stmts)

        blocks = []
        for b in self.original.blocks:
            if b.kind == "functions":
                blocks.append(b)
            else:
                blocks.append(Block(b.kind, rewrite_stmts(b.stmts)))
        impls = []
        for decl in self.original.impls:
            fields = tuple(
                FieldDecl(f.name, f.params, f.obs_params, rewrite_stmts(f.body), _map_ret(f.ret, rewrite_fn))
                for f in decl.fields
            )
            appends = tuple(
                ab if ab.kind == "functions" else Block(ab.kind, rewrite_stmts(ab.stmts))
                for ab in decl.append_blocks
            )
            impls.append(ImplDecl(decl.impl_name, decl.hole_name, fields, appends,
                                  decl.range_index_params, decl.inst_index_params, decl.span))
        self.program = Program(tuple(blocks), tuple(impls))
        self.program_impls = {}
        for decl in self.program.impls:
            self.program_impls.setdefault(decl.hole_name, {})[decl.impl_name] = decl

        # materialize implementation copies; copies may demand further copies
        while needed:
            hole, idx, kind = needed.pop()
            inst_hole = self._instance_hole_name(hole, idx, kind)
            sources = self.program_impls.get(hole)
            if not sources:
                raise MacroError(f"hole {hole} has no implementations", code="UNFILLED_HOLE")
            if kind == "instance":
                self.families.setdefault(hole, [])
                if inst_hole not in self.families[hole]:
                    self.families[hole].append(inst_hole)
            for name, src in sorted(sources.items()):
                mapping = dict(zip(src.inst_index_params, idx))
                if src.inst_index_params and len(src.inst_index_params) != len(idx):
                    raise MacroError(
                        f'implementation "{name}" of {hole} takes {len(src.inst_index_params)} '
                        f"instance indices, site supplies {len(idx)}"
                    )
                copy = _substitute_indices(src, mapping) if mapping else src
                copy = _rename_globals(copy, f"_{_sanitize(hole)}_{'_'.join(str(v) for v in idx)}")

                # the substitution may have produced concrete instance tags
                def collect_fn(e: Expr):
                    if isinstance(e, HoleCall) and e.ref.inst is not None and not any(
                        isinstance(a, SymAtom) for a in e.ref.inst.atoms
                    ):
                        ref = e.ref
                        h2 = ref.terms[0].name
                        out_calls = []
                        for idx2 in expand_ranges(ref.inst.atoms):
                            nm = self._instance_hole_name(h2, idx2, ref.inst.kind)
                            key = (h2, idx2, ref.inst.kind)
                            if key not in seen:
                                seen.add(key)
                                needed.append(key)
                            out_calls.append(HoleCall(HoleRef((HoleTerm(nm),), ref.field_name), e.args, e.span))
                        return out_calls[0] if len(out_calls) == 1 else ArrayLit(tuple(out_calls))
                    return None

                copy = _map_impl_stmts(copy, collect_fn)
                copy = ImplDecl(name, inst_hole, copy.fields, copy.append_blocks, (), (), copy.span)
                self.synth[(inst_hole, name)] = copy
                self.instantiations += 1

    # -- step 2: units and site normalization ---------------------------------

    def _normalize_fn(self, e: Expr):
        if isinstance(e, HoleCall) and not e.ref.is_plain:
            unit_name = e.ref.base_name
            return HoleCall(HoleRef((HoleTerm(unit_name),), e.ref.field_name), e.args, e.span)
        return None

    def _register_site(self, hc: HoleCall) -> None:
        ref = hc.ref
        name = ref.base_name
        decorated = not ref.is_plain
        existing = self.units.get(name)
        if existing is not None:
            if existing.ref is not None and decorated and existing.ref != ref:
                raise MacroError(f"hole {name} is used with conflicting decorations")
            return
        if not decorated:
            if name in self.synth_holes:
                kind = "copy" if "<<" in name else "plain"
                self.units[name] = Unit(kind=kind, name=name, hole=name)
            elif name in self.families:
                pass  # family unit added at the end
            else:
                self.units[name] = Unit(kind="plain", name=name, hole=name)
            return
        members = MemberSet(self, ref)
        kind = "collection" if ref.collect else "choice"
        self.units[name] = Unit(kind=kind, name=name, members=members, ref=ref, args=hc.args)

    @property
    def synth_holes(self) -> set[str]:
        return {h for h, _ in self.synth}

    def _build_units(self) -> None:
        def scan(stmts):
            for hc in iter_hole_calls(tuple(stmts)):
                if hc.ref.inst is not None:
                    continue  # symbolic instance tags inside templates
                self._register_site(hc)

        for b in self.program.blocks:
            if b.kind == "functions":
                for f in b.stmts:
                    scan(f.body)
            else:
                scan(b.stmts)
        for decl in list(self.program.impls) + list(self.synth.values()):
            for f in decl.fields:
                body = list(f.body)
                if f.ret is not None:
                    body.append(ReturnStmt(f.ret))
                scan(body)
            for ab in decl.append_blocks:
                if ab.kind != "functions":
                    scan(ab.stmts)
        for hole, instances in self.families.items():
            plain_unit = self.units.pop(hole, None)
            inst_list = list(instances)
            if plain_unit is not None and plain_unit.kind == "plain":
                inst_list.append(hole)
            self.units[hole] = Unit(kind="family", name=hole, hole=hole, instances=tuple(sorted(inst_list)))
        # record base units
        base: set[str] = set()
        for b in self.program.blocks:
            lists = [f.body for f in b.stmts] if b.kind == "functions" else [b.stmts]
            for stmts in lists:
                for hc in iter_hole_calls(tuple(stmts)):
                    base.add(self.unit_of_core_hole(hc.ref.base_name))
        self.base_units = frozenset(base)

    def unit_of_core_hole(self, core: str) -> str:
        if "<" in core and "<<" not in core:
            return core.split("<", 1)[0]
        return core

    def core_impl_decl(self, core_hole: str, impl_name: str) -> ImplDecl:
        if (core_hole, impl_name) in self.synth:
            return self.synth[(core_hole, impl_name)]
        if core_hole.endswith(">>"):
            src_hole = core_hole.split("<<", 1)[0]
            raise MacroError(f"copy hole {core_hole} has no materialized implementation {impl_name}")
        return self.program_impls[core_hole][impl_name]

    def normalized_impl(self, core_hole: str, impl_name: str) -> ImplDecl:
        key = (core_hole, impl_name)
        if key not in self._norm_impl_cache:
            decl = self.core_impl_decl(core_hole, impl_name)
            self._norm_impl_cache[key] = _map_impl_stmts(decl, self._normalize_fn)
        return self._norm_impl_cache[key]

    def impl_unit_holes(self, core_hole: str, impl_name: str) -> frozenset[str]:
        decl = self.core_impl_decl(core_hole, impl_name)
        out: set[str] = set()
        for f in decl.fields:
            body = list(f.body)
            if f.ret is not None:
                body.append(ReturnStmt(f.ret))
            for hc in iter_hole_calls(tuple(body)):
                if hc.ref.inst is not None:
                    continue
                out.add(self.unit_of_core_hole(hc.ref.base_name))
        for ab in decl.append_blocks:
            if ab.kind == "functions":
                continue
            for hc in iter_hole_calls(tuple(ab.stmts)):
                out.add(self.unit_of_core_hole(hc.ref.base_name))
        return frozenset(out)

    # -- unit structure ---------------------------------------------------------

    def unit_impls(self, name: str) -> tuple[str, ...]:
        u = self.units[name]
        if u.kind in ("plain", "family"):
            return tuple(sorted(self.program_impls.get(u.hole, {})))
        if u.kind == "copy":
            names = {i for (h, i) in self.synth if h == name}
            return tuple(sorted(names))
        if u.kind == "choice":
            return tuple(self.choice_impl_string(u, k) for k in u.members.iter_keys())
        if u.kind == "collection":
            return (MERGE_PREFIX + name,)
        raise KeyError(name)

    def unit_impl_holes(self, name: str, impl: str, include_members: bool) -> frozenset[str]:
        u = self.units[name]
        if u.kind == "plain":
            return self.impl_unit_holes(u.hole, impl)
        if u.kind == "copy":
            return self.impl_unit_holes(name, impl)
        if u.kind == "family":
            out: set[str] = set()
            for inst in u.instances:
                if inst == u.hole:
                    out |= self.impl_unit_holes(u.hole, impl)
                else:
                    out |= self.impl_unit_holes(inst, impl)
            return frozenset(out)
        if u.kind == "choice":
            key = self._member_key_of_impl(u, impl)
            return self.member_template_holes(u, key)
        if u.kind == "collection":
            if include_members:
                return frozenset(member_hole_name(name, k) for k in u.members.iter_keys())
            return frozenset()
        raise KeyError(name)

    def choice_impl_string(self, u: Unit, key: MemberKey) -> str:
        if len(u.members.terms) == 1:
            t = u.members.terms[0]
            if t.indexed and t.term.exp == 1 and not t.term.exp_mode:
                if t.multi_template:
                    tmpl, idx = key.parts[0], key.parts[1:]
                else:
                    tmpl, idx = t.template_names[0], key.parts
                return f"{tmpl}[" + ",".join(str(v) for v in idx) + "]"
        return key.canonical()

    def _member_key_of_impl(self, u: Unit, impl: str) -> MemberKey:
        from .selections import parse_selection

        b = parse_selection(f"X:{impl}")[0]
        if b.subset is not None and len(b.subset) == 1:
            raw = MemberKey(b.subset[0])
        elif b.indices is not None:
            raw = MemberKey((b.impl,) + tuple(b.indices))
        else:
            raw = MemberKey((b.impl,))
        resolved = u.members.resolve(raw)
        if resolved is None:
            raise MacroError(f"{impl!r} is not a member of {u.name}")
        return resolved

    def member_template_holes(self, u: Unit, key: MemberKey) -> frozenset[str]:
        out: set[str] = set()
        for t, part in zip(u.members.terms, u.members.split(key)):
            decl, _idx = t.base_impl(part if t.width() == t.base_width() else part[: t.base_width()])
            out |= self.impl_unit_holes(decl.hole_name, decl.impl_name)
        return frozenset(out)

    def collection_is_leaf(self, u: Unit) -> bool:
        for t in u.members.terms:
            for name, decl in t.templates.items():
                if self.impl_unit_holes(decl.hole_name, name):
                    return False
        return True

    # -- spaces -----------------------------------------------------------------

    def unit_space(self, include_members: bool = True, member_cap: int = 4096) -> "UnitSpace":
        if include_members:
            total = sum(
                u.members.count() for u in self.units.values() if u.kind == "collection"
            )
            if total > member_cap:
                raise CapExceededMembers(total, member_cap)
        return UnitSpace(self, include_members)

    def skeleton_space(self) -> "UnitSpace":
        return UnitSpace(self, include_members=False)

    # -- member materialization ---------------------------------------------------

    def materialize_member(self, u: Unit, key: MemberKey, hole_name: str, impl_name: str) -> ImplDecl:
        """Synthesize the module implementation for one member of a macro hole."""
        parts = u.members.split(key)
        pieces: list[tuple[ImplDecl, tuple[int, ...], str]] = []
        for t, part in zip(u.members.terms, parts):
            reps = t.term.exp if (t.term.exp != 1 or t.term.exp_mode) else 1
            w = t.base_width()
            for r in range(reps):
                sub = part[r * w : (r + 1) * w]
                decl, idx = t.base_impl(sub)
                pieces.append((decl, idx, t.term.name))
        suffix_root = f"_{_sanitize(u.name)}_{_sanitize(key.hole_suffix())}"
        params: list[Param] = []
        body: list[Stmt] = []
        rets: list[Expr] = []
        appends: dict[str, list[Stmt]] = {}
        fn_appends: list = []
        taken_params: set[str] = set()
        for pos, (decl, idx, _tname) in enumerate(pieces):
            mapping = dict(zip(decl.range_index_params, idx))
            inst = _substitute_indices(decl, mapping) if mapping else decl
            suffix = suffix_root if len(pieces) == 1 else f"{suffix_root}_{pos + 1}"
            inst = _rename_globals(inst, suffix)
            inst = _map_impl_stmts(inst, self._normalize_fn)
            f = inst.fields[0]
            rename_params: dict[str, Expr] = {}
            for p in f.obs_params + f.params:
                pname = p.name
                if pname in taken_params:
                    pname = f"{p.name}_{pos + 1}"
                    rename_params[p.name] = Var(pname)
                taken_params.add(pname)
                params.append(Param(p.ty, pname))
            stmts = [substitute_stmt(s, rename_params) for s in f.body]
            body.extend(stmts)
            if f.ret is not None:
                rets.append(substitute(f.ret, rename_params))
            for ab in inst.append_blocks:
                if ab.kind == "functions":
                    fn_appends.extend(ab.stmts)
                else:
                    appends.setdefault(ab.kind, []).extend(ab.stmts)
        self.instantiations += 1
        ret: Optional[Expr] = None
        if rets:
            ret = rets[0] if len(rets) == 1 else TupleLit(tuple(rets))
        append_blocks = tuple(
            Block(kind, tuple(stmts)) for kind, stmts in sorted(appends.items())
        )
        if fn_appends:
            append_blocks = (Block("functions", tuple(fn_appends)),) + append_blocks
        field0 = FieldDecl("", tuple(params), (), tuple(body), ret)
        return ImplDecl(impl_name, hole_name, (field0,), append_blocks)

    def collection_is_void(self, u: Unit) -> bool:
        for t in u.members.terms:
            for decl in t.templates.values():
                if decl.fields[0].ret is not None:
                    return False
        return True

    def merge_impl(self, u: Unit, selected: Sequence[MemberKey], wrap_members: bool = False) -> ImplDecl:
        """The synthesized implementation of a collection root.

        With `wrap_members=False` the body collects only the selected members
        directly into an array literal (the constant folding of the published
        construction, where unselected members contribute empty arrays). Void
        collections instead splice the selected members' statements.
        """
        template_params = self._collection_params(u)
        params = tuple(Param(None, f"arg_{k + 1}") for k in range(template_params))
        arg_vars = tuple(Var(p.name) for p in params)
        calls = [
            HoleCall(HoleRef((HoleTerm(member_hole_name(u.name, key)),)), arg_vars)
            for key in selected
        ]
        self.instantiations += 1
        if self.collection_is_void(u):
            body = tuple(CallStmt(c) for c in calls)
            return ImplDecl(MERGE_PREFIX + u.name, u.name, (FieldDecl("", params, (), body, None),))
        if wrap_members:
            ret: Expr = Call("concat_arrays", tuple(calls))
        else:
            ret = ArrayLit(tuple(calls))
        return ImplDecl(MERGE_PREFIX + u.name, u.name, (FieldDecl("", params, (), (), ret),))

    def _collection_params(self, u: Unit) -> int:
        n = 0
        for t in u.members.terms:
            reps = t.term.exp if (t.term.exp != 1 or t.term.exp_mode) else 1
            decl = t.templates[t.template_names[0]]
            f = decl.fields[0]
            n += reps * len(f.obs_params + f.params)
        return n

    # -- selection resolution and validation ----------------------------------

    def resolve_selection(self, spec: SelectionSpec) -> MacroSelection:
        plain: dict[str, str] = {}
        subsets: dict[str, tuple[MemberKey, ...]] = {}
        for b in spec:
            u = self.units.get(b.hole)
            if u is None:
                raise SelectionError(f"'{b.hole}' does not name a hole of this program")
            if u.kind == "collection":
                if b.subset is None:
                    raise SelectionError(
                        f"collection hole {u.name} needs a subset binding like {u.name}:[..]"
                    )
                keys = []
                for m in b.subset:
                    key = u.members.resolve(MemberKey(m))
                    if key is None:
                        code = "INDEX_OUT_OF_RANGE" if all(isinstance(p, int) for p in m) else "UNKNOWN_MEMBER"
                        raise SelectionError(
                            f"{MemberKey(m).canonical()} is not a member of collection hole {u.name}", code=code
                        )
                    keys.append(key)
                subsets[u.name] = tuple(sorted(keys, key=lambda k: k.parts))
                continue
            if u.kind == "choice":
                if b.subset is not None and len(b.subset) == 1:
                    raw = MemberKey(b.subset[0])
                elif b.impl is not None and b.indices is not None:
                    raw = MemberKey((b.impl,) + tuple(b.indices))
                elif b.impl is not None:
                    raw = MemberKey((b.impl,))
                else:
                    raise SelectionError(f"hole {u.name} needs one member, not a subset")
                key = u.members.resolve(raw)
                if key is None:
                    code = "INDEX_OUT_OF_RANGE" if b.indices is not None else "UNKNOWN_IMPL"
                    raise SelectionError(
                        f"{raw.canonical()} is not an implementation of {u.name}", code=code
                    )
                plain[u.name] = self.choice_impl_string(u, key)
                continue
            # plain, family, copy
            if b.subset is not None or b.indices is not None:
                raise SelectionError(f"hole {u.name} takes a single implementation name")
            if b.impl not in self.unit_impls(u.name):
                raise SelectionError(
                    f'"{b.impl}" is not an implementation of hole {u.name}', code="UNKNOWN_IMPL"
                )
            plain[u.name] = b.impl
        return MacroSelection(tuple(sorted(plain.items())), tuple(sorted(subsets.items())))

    def required_units(self, msel: MacroSelection) -> frozenset[str]:
        plain = msel.plain_map()
        subsets = msel.subset_map()
        required: set[str] = set()
        frontier = list(self.base_units)
        seen = set(frontier)
        while frontier:
            name = frontier.pop()
            required.add(name)
            u = self.units.get(name)
            if u is None:
                continue
            nxt: frozenset[str] = frozenset()
            if u.kind == "collection":
                for key in subsets.get(name, ()):
                    nxt |= self.member_template_holes(u, key)
            else:
                impl = plain.get(name)
                if impl is not None and impl in self.unit_impls(name):
                    nxt = self.unit_impl_holes(name, impl, include_members=False)
            for h2 in nxt:
                if h2 not in seen:
                    seen.add(h2)
                    frontier.append(h2)
        return frozenset(required)

    def validate_selection(self, msel: MacroSelection) -> list[str]:
        violations: list[str] = []
        plain = msel.plain_map()
        subsets = msel.subset_map()
        required = self.required_units(msel)
        bound = set(plain) | set(subsets)
        for name in sorted(required - bound):
            u = self.units.get(name)
            if u is not None and u.kind == "copy":
                violations.append(f"copy hole {name} has no binding (MISSING_COPY_BINDING)")
            elif u is not None and u.kind == "collection":
                violations.append(f"collection hole {name} needs a subset binding, e.g. {name}:[]")
            else:
                violations.append(f"hole '{name}' has no implementation selected")
        for name in sorted(bound - required):
            violations.append(f"binding for '{name}' is extra: the hole is not required")
        return violations

    def is_valid_selection(self, msel: MacroSelection) -> bool:
        return not self.validate_selection(msel)

    # -- counting ----------------------------------------------------------------

    def member_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for name in sorted(self.units):
            u = self.units[name]
            if u.kind in ("collection", "choice"):
                out[name] = u.members.count()
            else:
                out[name] = len(self.unit_impls(name))
        return out

    def node_count(self) -> int:
        space = _CountSpace(self)
        total = 0
        for node in model_graph_nodes_only(space).selections():
            factor = 1
            for unit_name, impl in node.items():
                u = self.units[unit_name]
                if u.kind == "collection":
                    factor *= 2 ** u.members.count()
                elif u.kind == "choice":
                    factor *= u.members.count()
            total += factor
        return total

    # -- neighbors ------------------------------------------------------------------

    def neighbors(self, msel: MacroSelection, completion_cap: int = 4096) -> list[MacroSelection]:
        out: list[MacroSelection] = []
        seen: set[MacroSelection] = set()
        plain = msel.plain_map()
        subsets = msel.subset_map()
        nav = self.skeleton_space()
        for unit_name, impl in plain.items():
            u = self.units[unit_name]
            own = nav.impl_holes(unit_name, impl)
            for i2 in nav.hole_impls(unit_name):
                if i2 == impl:
                    continue
                if nav.impl_holes(unit_name, i2) == own:
                    n = msel.with_plain(unit_name, i2)
                    if n not in seen:
                        seen.add(n)
                        out.append(n)
                    continue
                swapped = dict(plain)
                swapped[unit_name] = i2
                completions = model_graph_nodes_only(limit(nav, swapped)).selections()
                for node in completions:
                    n = self._complete_macro_selection(node, subsets, completion_cap)
                    for cand in n:
                        if cand not in seen:
                            seen.add(cand)
                            out.append(cand)
        subsets_sorted = msel.subsets
        for pos, (root, members) in enumerate(subsets_sorted):
            u = self.units[root]
            before = subsets_sorted[:pos]
            after = subsets_sorted[pos + 1 :]
            current = set(members)
            plain_part = msel.plain
            for key in u.members.iter_keys():
                if key in current:
                    flipped = tuple(m for m in members if m != key)
                else:
                    flipped = tuple(sorted(members + (key,), key=lambda k: k.parts))
                out.append(MacroSelection(plain_part, before + ((root, flipped),) + after))
        return out

    def _complete_macro_selection(
        self,
        node: Selection,
        old_subsets: dict[str, tuple[MemberKey, ...]],
        completion_cap: int,
    ) -> list[MacroSelection]:
        plain: dict[str, str] = {}
        roots: list[str] = []
        for unit_name, impl in node.items():
            if self.units[unit_name].kind == "collection":
                roots.append(unit_name)
            else:
                plain[unit_name] = impl
        fixed: dict[str, tuple[MemberKey, ...]] = {}
        free: list[str] = []
        for r in roots:
            if r in old_subsets:
                fixed[r] = old_subsets[r]
            else:
                free.append(r)
        combos: list[dict[str, tuple[MemberKey, ...]]] = [fixed]
        for r in free:
            u = self.units[r]
            keys = list(u.members.iter_keys())
            if 2 ** len(keys) * len(combos) > completion_cap:
                raise MacroError(
                    f"too many completions through collection hole {r}; "
                    f"bind it explicitly in the selection"
                )
            new_combos = []
            for c in combos:
                for mask in range(2 ** len(keys)):
                    chosen = tuple(k for b, k in enumerate(keys) if mask >> b & 1)
                    d = dict(c)
                    d[r] = tuple(sorted(chosen, key=lambda k: k.parts))
                    new_combos.append(d)
            combos = new_combos
        return [
            MacroSelection(tuple(sorted(plain.items())), tuple(sorted(c.items())))
            for c in combos
        ]

    # -- concretization ------------------------------------------------------------

    def concretize(self, msel: MacroSelection) -> Program:
        violations = self.validate_selection(msel)
        if violations:
            from .inline import ConcretizeError

            raise ConcretizeError("invalid selection: " + "; ".join(violations))
        required = self.required_units(msel)
        plain = msel.plain_map()
        subsets = msel.subset_map()
        blocks = tuple(
            b if b.kind == "functions" else Block(b.kind, tuple(map_stmt_exprs(s, self._normalize_fn) for s in b.stmts))
            for b in self.program.blocks
        )
        impls: list[ImplDecl] = []
        core_sel: dict[str, str] = {}
        for unit_name in sorted(required):
            u = self.units[unit_name]
            if u.kind == "collection":
                selected = subsets[unit_name]
                impls.append(self.merge_impl(u, selected))
                core_sel[unit_name] = MERGE_PREFIX + unit_name
                for key in selected:
                    hole = member_hole_name(unit_name, key)
                    impls.append(self.materialize_member(u, key, hole, "yes"))
                    core_sel[hole] = "yes"
                continue
            impl = plain[unit_name]
            if u.kind == "plain":
                impls.append(self.normalized_impl(u.hole, impl))
                core_sel[u.hole] = impl
            elif u.kind == "copy":
                impls.append(self.normalized_impl(unit_name, impl))
                core_sel[unit_name] = impl
            elif u.kind == "family":
                for inst in u.instances:
                    impls.append(self.normalized_impl(inst, impl))
                    core_sel[inst] = impl
            elif u.kind == "choice":
                key = self._member_key_of_impl(u, impl)
                impls.append(self.materialize_member(u, key, unit_name, impl))
                core_sel[unit_name] = impl
        core = ModularProgram(Program(blocks, tuple(impls)))
        from .inline import concretize as core_concretize

        return core_concretize(core, Selection(core_sel))

    # -- full expansion (small programs) ---------------------------------------------

    def expand_full(
        self, member_cap: int = 4096, per_unit_limit: Optional[int] = None
    ) -> tuple[ModularProgram, "UnitSpace"]:
        """Materialize every synthetic module, following the published
        construction: per-member yes/no holes wrapping values in singleton or
        empty arrays, and a merge implementation concatenating them.

        `per_unit_limit` truncates each macro hole to its first members; the
        result is then a structurally/semantically faithful probe of the full
        expansion (members are independent), used to validate templates of
        programs too large to materialize."""
        if per_unit_limit is None:
            space = self.unit_space(include_members=True, member_cap=member_cap)
        else:
            space = None
        blocks = tuple(
            b if b.kind == "functions" else Block(b.kind, tuple(map_stmt_exprs(s, self._normalize_fn) for s in b.stmts))
            for b in self.program.blocks
        )
        impls: list[ImplDecl] = []
        for unit_name in sorted(self.units):
            u = self.units[unit_name]
            if u.kind == "plain":
                for name in self.unit_impls(unit_name):
                    impls.append(self.normalized_impl(u.hole, name))
            elif u.kind == "copy":
                for name in self.unit_impls(unit_name):
                    impls.append(self.normalized_impl(unit_name, name))
            elif u.kind == "family":
                for inst in u.instances:
                    for name in self.unit_impls(unit_name):
                        impls.append(self.normalized_impl(inst, name))
            elif u.kind == "choice":
                for name in self.unit_impls(unit_name) if per_unit_limit is None else self._first_impls(u, per_unit_limit):
                    key = self._member_key_of_impl(u, name)
                    impls.append(self.materialize_member(u, key, unit_name, name))
            elif u.kind == "collection":
                keys = list(u.members.iter_keys()) if per_unit_limit is None else self._first_keys(u, per_unit_limit)
                impls.append(self.merge_impl(u, keys, wrap_members=True))
                for key in keys:
                    hole = member_hole_name(unit_name, key)
                    base = self.materialize_member(u, key, hole, "yes")
                    f = base.fields[0]
                    yes_ret = ArrayLit((f.ret,)) if f.ret is not None else None
                    impls.append(
                        ImplDecl("yes", hole, (FieldDecl("", f.params, f.obs_params, f.body, yes_ret),), base.append_blocks)
                    )
                    no_ret = ArrayLit(()) if f.ret is not None else None
                    impls.append(ImplDecl("no", hole, (FieldDecl("", f.params, (), (), no_ret),)))
        return ModularProgram(Program(blocks, tuple(impls))), space

    def _first_keys(self, u: Unit, limit: int) -> list[MemberKey]:
        out: list[MemberKey] = []
        for key in u.members.iter_keys():
            out.append(key)
            if len(out) >= limit:
                break
        return out

    def _first_impls(self, u: Unit, limit: int) -> list[str]:
        return [self.choice_impl_string(u, k) for k in self._first_keys(u, limit)]

    # -- selection translation ---------------------------------------------------------

    def translate(self, msel: MacroSelection) -> Selection:
        """User-level selection to the post-expansion core bindings."""
        required = self.required_units(msel)
        plain = msel.plain_map()
        subsets = msel.subset_map()
        core: dict[str, str] = {}
        for unit_name in sorted(required):
            u = self.units[unit_name]
            if u.kind == "collection":
                selected = set(subsets[unit_name])
                core[unit_name] = MERGE_PREFIX + unit_name
                for key in u.members.iter_keys():
                    core[member_hole_name(unit_name, key)] = "yes" if key in selected else "no"
            elif u.kind == "family":
                for inst in u.instances:
                    core[inst] = plain[unit_name]
            else:
                core[unit_name] = plain[unit_name]
        return Selection(core)

    def inverse_translate(self, core: Selection) -> MacroSelection:
        """Core bindings back to the user-facing form (display direction)."""
        plain: dict[str, str] = {}
        subsets: dict[str, list[MemberKey]] = {}
        member_index: dict[str, tuple[str, MemberKey]] = {}
        for name, u in self.units.items():
            if u.kind == "collection":
                subsets.setdefault(name, [])
                for key in u.members.iter_keys():
                    member_index[member_hole_name(name, key)] = (name, key)
        for hole, impl in core.items():
            if hole in member_index:
                root, key = member_index[hole]
                if impl == "yes":
                    subsets[root].append(key)
                continue
            unit_name = self.unit_of_core_hole(hole)
            u = self.units.get(unit_name)
            if u is None:
                continue
            if u.kind == "collection":
                continue  # the merge binding carries no information
            plain[unit_name] = impl
        return MacroSelection(
            tuple(sorted(plain.items())),
            tuple(sorted((r, tuple(sorted(ks, key=lambda k: k.parts))) for r, ks in subsets.items())),
        )

    def selection_from_string(self, text: str) -> MacroSelection:
        from .selections import parse_selection

        return self.resolve_selection(parse_selection(text))


class CapExceededMembers(Exception):
    def __init__(self, total: int, cap: int):
        super().__init__(f"collection member count {total} exceeds materialization cap {cap}")
        self.total = total
        self.cap = cap


# ---------------------------------------------------------------------------
# Unit spaces
# ---------------------------------------------------------------------------


class UnitSpace:
    """ModelSpace over selection units (optionally including member units)."""

    def __init__(self, mp: MacroProgram, include_members: bool):
        self.mp = mp
        self.include_members = include_members
        self._member_units: dict[str, tuple[str, MemberKey]] = {}
        if include_members:
            for name, u in mp.units.items():
                if u.kind == "collection":
                    for key in u.members.iter_keys():
                        self._member_units[member_hole_name(name, key)] = (name, key)

    def base_holes(self) -> frozenset[str]:
        return self.mp.base_units

    def all_holes(self) -> tuple[str, ...]:
        names = set(self.mp.units)
        names |= set(self._member_units)
        return tuple(sorted(names))

    def hole_impls(self, hole: str) -> tuple[str, ...]:
        if hole in self._member_units:
            return ("no", "yes")
        if hole not in self.mp.units:
            return ()
        return self.mp.unit_impls(hole)

    def impl_holes(self, hole: str, impl: str) -> frozenset[str]:
        if hole in self._member_units:
            if impl == "no":
                return frozenset()
            root, key = self._member_units[hole]
            return self.mp.member_template_holes(self.mp.units[root], key)
        return self.mp.unit_impl_holes(hole, impl, self.include_members)


class _CountSpace:
    """Skeleton with collection roots and choice units collapsed, for counting."""

    def __init__(self, mp: MacroProgram):
        self.mp = mp

    def base_holes(self) -> frozenset[str]:
        return self.mp.base_units

    def all_holes(self) -> tuple[str, ...]:
        return tuple(sorted(self.mp.units))

    def hole_impls(self, hole: str) -> tuple[str, ...]:
        u = self.mp.units[hole]
        if u.kind in ("collection", "choice"):
            return ("<any>",)
        return self.mp.unit_impls(hole)

    def impl_holes(self, hole: str, impl: str) -> frozenset[str]:
        u = self.mp.units[hole]
        if u.kind in ("collection", "choice"):
            out: set[str] = set()
            for t in u.members.terms:
                for name, decl in t.templates.items():
                    out |= self.mp.impl_unit_holes(decl.hole_name, name)
            return frozenset(out)
        return self.mp.unit_impl_holes(hole, impl, include_members=False)


def symbolic_count(value: int, bits_threshold: int = 64) -> Union[int, dict]:
    """Exact int when small; otherwise a (coefficient, base, exponent) form."""
    if value.bit_length() <= bits_threshold:
        return value
    exponent = (value & -value).bit_length() - 1 if value else 0
    coefficient = value >> exponent
    if coefficient == 1:
        return {"base": 2, "exponent": exponent}
    if coefficient.bit_length() <= bits_threshold:
        return {"coefficient": coefficient, "base": 2, "exponent": exponent}
    shift = coefficient.bit_length() - 1
    approx = round(coefficient / (1 << shift), 6)
    return {"coefficient": approx, "base": 2, "exponent": exponent + shift}
