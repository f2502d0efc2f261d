"""Structural host-type model used by signature inference and typechecking.

Types are shapes without sizes: int, real, vector, row_vector, matrix, plus
array wrappers, tuples (produced only by hole products), void, and unknown.
Unknown is the result type of calls to functions we have no table entry for;
it unifies with everything, which keeps the checker permissive over the large
parts of the host standard library we do not model. Constraint annotations
(`<lower=0>`) carry no typing semantics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import TypeNode


@dataclass(frozen=True)
class Ty:
    kind: str  # int real vector row_vector matrix void unknown tuple
    dims: int = 0  # array dimensions wrapped around the base shape
    parts: tuple["Ty", ...] = ()

    def __str__(self) -> str:
        if self.kind == "tuple":
            inner = "(" + ", ".join(str(p) for p in self.parts) + ")"
        else:
            inner = self.kind
        return inner + "[]" * self.dims

    @property
    def is_array(self) -> bool:
        return self.dims > 0

    def elem(self) -> "Ty":
        assert self.dims > 0
        return Ty(self.kind, self.dims - 1, self.parts)

    def array(self, extra: int = 1) -> "Ty":
        return Ty(self.kind, self.dims + extra, self.parts)


INT = Ty("int")
REAL = Ty("real")
VECTOR = Ty("vector")
ROW_VECTOR = Ty("row_vector")
MATRIX = Ty("matrix")
VOID = Ty("void")
UNKNOWN = Ty("unknown")

_SCALAR = {"int", "real"}
_CONTAINER = {"vector", "row_vector", "matrix"}


def is_scalar(t: Ty) -> bool:
    return t.dims == 0 and t.kind in _SCALAR


def is_container(t: Ty) -> bool:
    return t.dims == 0 and t.kind in _CONTAINER


def is_numericish(t: Ty) -> bool:
    return t.kind in _SCALAR | _CONTAINER or t.kind == "unknown"


def compatible(want: Ty, got: Ty) -> bool:
    """Whether `got` may appear where `want` is expected (int promotes to real)."""
    if want.kind == "unknown" or got.kind == "unknown":
        return True
    if want == got:
        return True
    if want.dims != got.dims:
        return False
    if want.kind == "real" and got.kind == "int":
        return True
    if want.kind == "tuple" and got.kind == "tuple":
        return len(want.parts) == len(got.parts) and all(
            compatible(a, b) for a, b in zip(want.parts, got.parts)
        )
    return False


def join(a: Ty, b: Ty) -> Optional[Ty]:
    """Least common type of two branches, None when incomparable."""
    if a.kind == "unknown":
        return b
    if b.kind == "unknown":
        return a
    if a == b:
        return a
    if a.dims == b.dims and {a.kind, b.kind} == {"int", "real"}:
        return Ty("real", a.dims)
    return None


def from_type_node(ty: TypeNode) -> Ty:
    base = {
        "int": INT,
        "real": REAL,
        "vector": VECTOR,
        "row_vector": ROW_VECTOR,
        "matrix": MATRIX,
        "simplex": VECTOR,
        "ordered": VECTOR,
        "unit_vector": VECTOR,
    }[ty.base]
    return base.array(len(ty.array_dims)) if ty.array_dims else base


def binary_type(op: str, a: Ty, b: Ty) -> Optional[Ty]:
    if op in ("==", "!=", "<", "<=", ">", ">=", "&&", "||"):
        if is_numericish(a) and is_numericish(b):
            return INT
        return None
    if a.kind == "unknown" or b.kind == "unknown":
        return UNKNOWN
    if a.is_array or b.is_array:
        return None
    if op in ("+", "-"):
        if a.kind == "int" and b.kind == "int":
            return INT
        if is_scalar(a) and is_scalar(b):
            return REAL
        if a == b and is_container(a):
            return a
        if is_container(a) and is_scalar(b):
            return a
        if is_scalar(a) and is_container(b):
            return b
        return None
    if op == "*":
        if a.kind == "int" and b.kind == "int":
            return INT
        if is_scalar(a) and is_scalar(b):
            return REAL
        if is_scalar(a) and is_container(b):
            return b
        if is_container(a) and is_scalar(b):
            return a
        pair = (a.kind, b.kind)
        table = {
            ("vector", "row_vector"): MATRIX,
            ("row_vector", "vector"): REAL,
            ("matrix", "vector"): VECTOR,
            ("row_vector", "matrix"): ROW_VECTOR,
            ("matrix", "matrix"): MATRIX,
        }
        return table.get(pair)
    if op == "/":
        if a.kind == "int" and b.kind == "int":
            return INT
        if is_scalar(a) and is_scalar(b):
            return REAL
        if is_container(a) and is_scalar(b):
            return a
        return None
    if op in (".*", "./"):
        if a == b and is_container(a):
            return a
        if is_container(a) and is_scalar(b):
            return a
        if is_scalar(a) and is_container(b):
            return b
        if is_scalar(a) and is_scalar(b):
            return REAL
        return None
    if op == "^":
        if is_scalar(a) and is_scalar(b):
            return INT if a.kind == "int" and b.kind == "int" else REAL
        return None
    return None


def unary_type(op: str, a: Ty) -> Optional[Ty]:
    if a.kind == "unknown":
        return UNKNOWN
    if op == "!":
        return INT if is_scalar(a) else None
    if is_scalar(a) or is_container(a):
        return a
    return None


def index_type(base: Ty, idx_kinds: list[str]) -> Optional[Ty]:
    """Apply a chain of index entries; entries are 'int', 'int_array' or 'slice'."""
    t = base
    i = 0
    while i < len(idx_kinds):
        k = idx_kinds[i]
        if t.kind == "unknown":
            return UNKNOWN
        if t.is_array:
            if k == "int":
                t = t.elem()
            elif k in ("int_array", "slice"):
                pass  # dimension kept
            else:
                return None
            i += 1
            continue
        if t.kind in ("vector", "row_vector"):
            if k == "int":
                t = REAL
            elif k in ("int_array", "slice"):
                pass
            else:
                return None
            i += 1
            continue
        if t.kind == "matrix":
            if k == "int":
                t = ROW_VECTOR
            elif k in ("int_array", "slice"):
                t = MATRIX if k == "slice" else MATRIX
                # one row-index consumed; keep matrix shape for slices/gathers
            i += 1
            continue
        return None
    return t


_ELEMENTWISE = frozenset(
    """logit inv_logit Phi inv_Phi asin acos atan sin cos tan exp log log1p log2
    sqrt square fabs abs inv erf erfc tanh sinh cosh step softmax log1m
    """.split()
)

_REDUCERS = frozenset("mean sd variance max min prod".split())


def _elementwise(args: list[Ty]) -> Optional[Ty]:
    if len(args) != 1:
        return None
    a = args[0]
    if a.kind == "unknown":
        return UNKNOWN
    if is_scalar(a):
        return REAL
    if is_container(a) or (a.is_array and a.kind in _SCALAR):
        return a if a.kind != "int" else Ty("real", a.dims)
    return None


def _sum_type(args: list[Ty]) -> Optional[Ty]:
    if len(args) != 1:
        return None
    a = args[0]
    if a.kind == "unknown":
        return UNKNOWN
    if is_container(a):
        return REAL
    if a.is_array:
        return a.elem() if a.elem().dims == 0 else None
    if is_scalar(a):
        return a
    return None


def builtin_call_type(name: str, args: list[Ty]) -> Optional[Ty]:
    """Return type of a builtin call, UNKNOWN for unmodeled names, None on misuse."""
    if name in _ELEMENTWISE:
        out = _elementwise(args)
        return out if out is not None else UNKNOWN
    if name == "sum":
        return _sum_type(args)
    if name in _REDUCERS:
        return REAL
    if name == "pi":
        return REAL if not args else None
    if name in ("num_elements", "rows", "cols", "size"):
        return INT if len(args) == 1 else None
    if name == "rep_vector":
        return VECTOR if len(args) == 2 else None
    if name == "rep_row_vector":
        return ROW_VECTOR if len(args) == 2 else None
    if name == "rep_matrix":
        return MATRIX
    if name == "rep_array":
        return args[0].array() if len(args) >= 2 else None
    if name == "to_vector":
        return VECTOR if len(args) == 1 else None
    if name == "to_row_vector":
        return ROW_VECTOR if len(args) == 1 else None
    if name == "dot_product":
        return REAL if len(args) == 2 else None
    if name == "append_array":
        if len(args) == 2 and args[0].is_array:
            return args[0]
        return UNKNOWN
    if name == "concat_arrays":
        # internal variadic concatenation used by collection-hole merges
        best: Optional[Ty] = None
        for a in args:
            if not a.is_array and a.kind != "unknown":
                return None
            if a.is_array and a.kind != "unknown":
                best = a if best is None else best
        return best if best is not None else UNKNOWN.array()
    if name.endswith("_rng"):
        return REAL if all(is_scalar(a) for a in args) else UNKNOWN
    if name.endswith("_lpdf") or name.endswith("_lpmf"):
        return REAL
    return UNKNOWN


# Names the resolver must never treat as holes even when capitalized.
BUILTIN_NAMES = frozenset(
    _ELEMENTWISE
    | _REDUCERS
    | {
        "sum",
        "pi",
        "num_elements",
        "rows",
        "cols",
        "size",
        "rep_vector",
        "rep_row_vector",
        "rep_matrix",
        "rep_array",
        "to_vector",
        "to_row_vector",
        "dot_product",
        "append_array",
        "concat_arrays",
        "print",
        "Phi_approx",
    }
)

EFFECTS_ALLOWED: dict[str, frozenset[str]] = {
    "functions": frozenset(),
    "data": frozenset(),
    "transformed data": frozenset(),
    "parameters": frozenset(),
    "transformed parameters": frozenset({"LPDF"}),
    "model": frozenset({"LPDF"}),
    "generated quantities": frozenset({"RNG"}),
}

SCOPE_ALLOWED: dict[str, frozenset[str]] = {
    "functions": frozenset(),
    "data": frozenset(),
    "transformed data": frozenset({"data"}),
    "parameters": frozenset(),
    "transformed parameters": frozenset({"data", "transformed data", "parameters"}),
    "model": frozenset({"data", "transformed data", "parameters", "transformed parameters"}),
    "generated quantities": frozenset(
        {"data", "transformed data", "parameters", "transformed parameters"}
    ),
}
