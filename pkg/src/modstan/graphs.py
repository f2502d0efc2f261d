"""The model-space engine: enumerate and navigate the network of programs.

Everything here works against a minimal protocol (`ModelSpace`): the set of
holes in the base, the implementations of each hole, and the holes contained
by each implementation. `ModularProgram` satisfies it directly; the macro
layer exposes lazily expanded views of the same protocol.

Two enumeration paths exist on purpose. `naive_model_graph` is the
independent oracle: it enumerates the full Cartesian product of
implementations, closes each combination against the base, deduplicates, and
pairs nodes by sibling count. `model_graph` builds nodes and edges
simultaneously by expanding model/edge prefixes hole-by-hole in topological
dependency order, which never visits a prefix that cannot be completed to a
model. `model_graph_nodes_only` is the same expansion specialized to nodes,
with bucket indexing and persistent selection chains so that deep chains of
dependent holes enumerate in time proportional to the number of prefix
extensions rather than holes-times-nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations, product
from typing import Mapping, Optional, Protocol

from .program import Selection, sibling_count, siblings


class ModelSpace(Protocol):
    def base_holes(self) -> frozenset[str]: ...

    def all_holes(self) -> tuple[str, ...]: ...

    def hole_impls(self, hole: str) -> tuple[str, ...]: ...

    def impl_holes(self, hole: str, impl: str) -> frozenset[str]: ...


class CapExceeded(Exception):
    def __init__(self, total: int, cap: int):
        # huge counts are reported by magnitude; stringifying them exactly
        # can itself be quadratic in their size
        label = str(total) if total.bit_length() <= 64 else f"about 2^{total.bit_length() - 1}"
        super().__init__(f"combination count {label} exceeds cap {cap}")
        self.total = total
        self.cap = cap


# ---------------------------------------------------------------------------
# Selection helpers over a space
# ---------------------------------------------------------------------------


def close_selection(space: ModelSpace, sel: Mapping[str, str]) -> Selection:
    reached: dict[str, str] = {}
    frontier = list(space.base_holes())
    seen = set(frontier)
    while frontier:
        h = frontier.pop()
        i = sel.get(h)
        if i is None or i not in space.hole_impls(h):
            continue
        reached[h] = i
        for h2 in space.impl_holes(h, i):
            if h2 not in seen:
                seen.add(h2)
                frontier.append(h2)
    return Selection(reached)


def selection_valid(space: ModelSpace, sel: Mapping[str, str]) -> bool:
    required = set(space.base_holes())
    for h, i in sel.items():
        if i not in space.hole_impls(h):
            return False
        required |= space.impl_holes(h, i)
    return required == set(sel)


def dependency_order(space: ModelSpace) -> tuple[str, ...]:
    """Topological order of the hole dependency graph, lexicographic ties."""
    holes = list(space.all_holes())
    succ: dict[str, set[str]] = {h: set() for h in holes}
    indeg: dict[str, int] = {h: 0 for h in holes}
    for h in holes:
        for i in space.hole_impls(h):
            for h2 in space.impl_holes(h, i):
                if h2 in succ[h] or h2 not in indeg:
                    continue
                succ[h].add(h2)
                indeg[h2] += 1
    import heapq

    ready = [h for h in holes if indeg[h] == 0]
    heapq.heapify(ready)
    out: list[str] = []
    while ready:
        h = heapq.heappop(ready)
        out.append(h)
        for h2 in sorted(succ[h]):
            indeg[h2] -= 1
            if indeg[h2] == 0:
                heapq.heappush(ready, h2)
    if len(out) != len(holes):
        raise ValueError("hole dependency graph is cyclic")
    return tuple(out)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelEdge:
    a: Selection
    b: Selection
    hole: str
    impls: tuple[str, str]

    def key(self) -> tuple[str, str]:
        return (self.a.canonical(), self.b.canonical())


@dataclass(frozen=True)
class ModelGraphResult:
    nodes: tuple[Selection, ...]
    edges: tuple[ModelEdge, ...]

    def node_ids(self) -> list[str]:
        return [n.canonical() for n in self.nodes]

    def adjacency(self, sel: Selection) -> set[Selection]:
        out = set()
        for e in self.edges:
            if e.a == sel:
                out.add(e.b)
            elif e.b == sel:
                out.add(e.a)
        return out

    def to_json(self) -> str:
        payload = {
            "nodes": [
                {"id": n.canonical(), "selection": [{"hole": h, "impl": i} for h, i in n.items()]}
                for n in self.nodes
            ],
            "edges": [
                {"a": e.a.canonical(), "b": e.b.canonical(), "hole": e.hole, "impls": list(e.impls)}
                for e in self.edges
            ],
        }
        return json.dumps(payload, indent=2)

    def to_dot(self) -> str:
        lines = ["graph models {"]
        for n in self.nodes:
            lines.append(f'  "{n.canonical()}";')
        for e in self.edges:
            lines.append(f'  "{e.a.canonical()}" -- "{e.b.canonical()}" [label="{e.hole}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _sorted_edge(a: Selection, b: Selection, hole: str, ia: str, ib: str) -> ModelEdge:
    if b.canonical() < a.canonical():
        a, b, ia, ib = b, a, ib, ia
    return ModelEdge(a, b, hole, (ia, ib))


# ---------------------------------------------------------------------------
# Naive oracle
# ---------------------------------------------------------------------------


def naive_model_graph(space: ModelSpace, cap: int = 1_000_000) -> ModelGraphResult:
    """Enumerate all implementation combinations, close, filter, dedupe, pair."""
    holes = list(space.all_holes())
    total = 1
    for h in holes:
        total *= max(1, len(space.hole_impls(h)))
        if total > cap:
            raise CapExceeded(total, cap)
    node_set: set[Selection] = set()
    impl_lists = [space.hole_impls(h) for h in holes]
    for combo in product(*impl_lists):
        sel = dict(zip(holes, combo))
        closed = close_selection(space, sel)
        if selection_valid(space, closed):
            node_set.add(closed)
    nodes = tuple(sorted(node_set, key=Selection.canonical))
    edges = []
    for a, b in combinations(nodes, 2):
        if sibling_count(a, b, limit=2) == 1:
            (hole, ia, ib) = next(iter(siblings(a, b)))
            edges.append(_sorted_edge(a, b, hole, ia, ib))
    edges.sort(key=ModelEdge.key)
    return ModelGraphResult(nodes, tuple(edges))


# ---------------------------------------------------------------------------
# Prefix-expansion algorithm (nodes and edges)
# ---------------------------------------------------------------------------


def model_graph(space: ModelSpace, observer=None) -> ModelGraphResult:
    """Prefix-expansion construction of nodes and edges.

    `observer(hole, prefixes)` is called after each expansion step with the
    partial selections currently stored; it exists so tests can check the
    prefix invariant (every stored prefix extends to at least one node).
    """
    order = dependency_order(space)
    # prefixes keyed by their selection items; the required-hole set H rides along
    nodes: dict[tuple, tuple[frozenset[str], dict[str, str]]] = {
        (): (frozenset(space.base_holes()), {})
    }
    # edge prefixes: (key1, key2) -> (I1, I2, label hole, impl pair)
    edges: dict[tuple[tuple, tuple], tuple[dict, dict, str, tuple[str, str]]] = {}

    def key_of(sel: dict[str, str]) -> tuple:
        return tuple(sorted(sel.items()))

    for h in order:
        impls = space.hole_impls(h)
        new_nodes: dict[tuple, tuple[frozenset[str], dict[str, str]]] = {}
        for key, (H, I) in nodes.items():
            if h in H:
                for i in impls:
                    I2 = dict(I)
                    I2[h] = i
                    new_nodes[key_of(I2)] = (H | space.impl_holes(h, i), I2)
            else:
                new_nodes[key] = (H, I)
        new_edges: dict[tuple[tuple, tuple], tuple[dict, dict, str, tuple[str, str]]] = {}

        def add_edge(I1: dict, I2: dict, hole: str, pair: tuple[str, str]):
            k1, k2 = key_of(I1), key_of(I2)
            if k2 < k1:
                k1, k2 = k2, k1
                I1, I2 = I2, I1
                pair = (pair[1], pair[0])
            new_edges[(k1, k2)] = (I1, I2, hole, pair)

        for key, (H, I) in nodes.items():
            if h in H:
                for i1, i2 in combinations(impls, 2):
                    A = dict(I)
                    A[h] = i1
                    B = dict(I)
                    B[h] = i2
                    add_edge(A, B, h, (i1, i2))
        for (k1, k2), (I1, I2, hole, pair) in edges.items():
            H1 = nodes[k1][0] if k1 in nodes else None
            H2 = nodes[k2][0] if k2 in nodes else None
            in1 = H1 is not None and h in H1
            in2 = H2 is not None and h in H2
            if not in1 and not in2:
                add_edge(I1, I2, hole, pair)
            elif in1 and not in2:
                for i in impls:
                    A = dict(I1)
                    A[h] = i
                    add_edge(A, I2, hole, pair)
            elif not in1 and in2:
                for i in impls:
                    B = dict(I2)
                    B[h] = i
                    add_edge(I1, B, hole, pair)
            else:
                for i in impls:
                    A = dict(I1)
                    A[h] = i
                    B = dict(I2)
                    B[h] = i
                    add_edge(A, B, hole, pair)
        nodes = new_nodes
        edges = new_edges
        if observer is not None:
            observer(h, [dict(I) for _, I in nodes.values()])

    out_nodes = tuple(sorted((Selection(I) for _, I in nodes.values()), key=Selection.canonical))
    out_edges = sorted(
        (_sorted_edge(Selection(I1), Selection(I2), hole, pair[0], pair[1]) for (I1, I2, hole, pair) in edges.values()),
        key=ModelEdge.key,
    )
    return ModelGraphResult(out_nodes, tuple(out_edges))


# ---------------------------------------------------------------------------
# Nodes-only expansion with persistent chains
# ---------------------------------------------------------------------------


class _Chain:
    __slots__ = ("hole", "impl", "parent", "length")

    def __init__(self, hole: str, impl: str, parent: Optional["_Chain"]):
        self.hole = hole
        self.impl = impl
        self.parent = parent
        self.length = 1 + (parent.length if parent is not None else 0)

    def items(self) -> list[tuple[str, str]]:
        out = []
        node: Optional[_Chain] = self
        while node is not None:
            out.append((node.hole, node.impl))
            node = node.parent
        out.reverse()
        return out


class _Prefix:
    __slots__ = ("chain", "pending", "dead")

    def __init__(self, chain: Optional[_Chain], pending: frozenset[str]):
        self.chain = chain
        self.pending = pending
        self.dead = False


class NodeSet:
    """Lazy set of model-graph nodes; materializes selections on demand."""

    def __init__(self, prefixes: list[_Prefix]):
        self._prefixes = prefixes

    def __len__(self) -> int:
        return len(self._prefixes)

    def selections(self) -> tuple[Selection, ...]:
        out = [Selection(dict(p.chain.items() if p.chain else [])) for p in self._prefixes]
        out.sort(key=Selection.canonical)
        return tuple(out)

    def __iter__(self):
        return iter(self.selections())


def model_graph_nodes_only(space: ModelSpace) -> NodeSet:
    order = dependency_order(space)
    root = _Prefix(None, frozenset(space.base_holes()))
    alive: list[_Prefix] = [root]
    buckets: dict[str, list[_Prefix]] = {}
    for h in root.pending:
        buckets.setdefault(h, []).append(root)
    for h in order:
        waiting = buckets.pop(h, ())
        for prefix in waiting:
            if prefix.dead:
                continue
            prefix.dead = True
            rest = prefix.pending - {h}
            for i in space.hole_impls(h):
                child = _Prefix(_Chain(h, i, prefix.chain), rest | space.impl_holes(h, i))
                alive.append(child)
                for h2 in child.pending:
                    if h2 != h:
                        buckets.setdefault(h2, []).append(child)
    return NodeSet([p for p in alive if not p.dead])


# ---------------------------------------------------------------------------
# Limit and neighbors
# ---------------------------------------------------------------------------


class LimitedSpace:
    """The program with implementation sets restricted to agree with a selection."""

    def __init__(self, space: ModelSpace, pinned: Mapping[str, str]):
        self._space = space
        self._pinned = dict(pinned)

    def base_holes(self) -> frozenset[str]:
        return self._space.base_holes()

    def all_holes(self) -> tuple[str, ...]:
        return self._space.all_holes()

    def hole_impls(self, hole: str) -> tuple[str, ...]:
        impls = self._space.hole_impls(hole)
        pin = self._pinned.get(hole)
        if pin is None:
            return impls
        return (pin,) if pin in impls else ()

    def impl_holes(self, hole: str, impl: str) -> frozenset[str]:
        return self._space.impl_holes(hole, impl)


def limit(space: ModelSpace, sel: Mapping[str, str]) -> LimitedSpace:
    return LimitedSpace(space, sel)


def model_neighbors(space: ModelSpace, sel: Selection) -> tuple[Selection, ...]:
    """All selections one module swap away from `sel`.

    Implements the union over each selected implementation and each of its
    siblings of the models of the program limited to the swapped selection.
    Swaps that do not change the reachable hole set are completed directly.
    """
    out: set[Selection] = set()
    for h, i in sel.items():
        own = space.impl_holes(h, i)
        for i2 in space.hole_impls(h):
            if i2 == i:
                continue
            if space.impl_holes(h, i2) == own:
                out.add(sel.bind(h, i2))
                continue
            swapped = dict(sel)
            swapped[h] = i2
            for node in model_graph_nodes_only(limit(space, swapped)).selections():
                out.add(node)
    return tuple(sorted(out, key=Selection.canonical))


def export_graph(g: ModelGraphResult, fmt: str) -> str:
    if fmt == "dot":
        return g.to_dot()
    if fmt == "json":
        return g.to_json()
    raise ValueError(f"unknown format {fmt!r} (expected dot or json)")
