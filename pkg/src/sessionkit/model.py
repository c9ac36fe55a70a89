"""Shared syntax trees: sorts, expressions/formulas, global and local
assertions, and participant processes.

Every node is an immutable dataclass. Source positions ride along in a
``pos`` field that is excluded from equality, so two trees parsed from
differently formatted text still compare equal.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Mapping, Optional, Union


class Sort(str, Enum):
    INT = "int"
    BOOL = "bool"
    STRING = "string"
    DATE = "date"

    def __str__(self) -> str:
        return self.value

    @property
    def assertable(self) -> bool:
        return self in (Sort.INT, Sort.BOOL)


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


def _pos():
    return field(default=None, compare=False, repr=False, kw_only=True)


class SortMismatch(Exception):
    """Raised when an expression of one sort is put where another is expected."""


# ---------------------------------------------------------------------------
# Expressions and formulas
#
# Formulas are boolean-valued expressions that may additionally use
# implication, quantifiers and (internally) divisibility atoms.


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Cmp:
    op: str  # one of = != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Exists:
    var: str
    sort: Sort
    body: "Expr"


@dataclass(frozen=True)
class Forall:
    var: str
    sort: Sort
    body: "Expr"


@dataclass(frozen=True)
class Divides:
    """``k | e``. Produced by quantifier elimination only; never parsed."""

    k: int
    expr: "Expr"


Expr = Union[IntLit, BoolLit, StrLit, Var, Neg, BinOp, Cmp, Not, And, Or,
             Implies, Exists, Forall, Divides]
Formula = Expr

TRUE = BoolLit(True)
FALSE = BoolLit(False)

CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")
NEGATED_CMP = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


def conj(*fs: Formula) -> Formula:
    """Flattening conjunction that drops ``true`` and absorbs ``false``."""
    out = []
    for f in fs:
        parts = f.args if isinstance(f, And) else (f,)
        for p in parts:
            if p == TRUE:
                continue
            if p == FALSE:
                return FALSE
            if p not in out:
                out.append(p)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(*fs: Formula) -> Formula:
    out = []
    for f in fs:
        parts = f.args if isinstance(f, Or) else (f,)
        for p in parts:
            if p == FALSE:
                continue
            if p == TRUE:
                return TRUE
            if p not in out:
                out.append(p)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def exists_many(names: Iterable[tuple[str, Sort]], body: Formula) -> Formula:
    """Wrap ``body`` in existentials; the first pair becomes the outermost."""
    pairs = list(names)
    for name, sort in reversed(pairs):
        body = Exists(name, sort, body)
    return body


def free_variables(f: Expr) -> set[str]:
    """Variables occurring in ``f`` outside any binder for them."""
    out: set[str] = set()
    _free(f, frozenset(), out)
    return out


def _free(e: Expr, bound: frozenset, out: set) -> None:
    match e:
        case Var(name):
            if name not in bound:
                out.add(name)
        case IntLit() | BoolLit() | StrLit():
            pass
        case Neg(x) | Not(x):
            _free(x, bound, out)
        case BinOp(_, l, r) | Cmp(_, l, r) | Implies(l, r):
            _free(l, bound, out)
            _free(r, bound, out)
        case And(args) | Or(args):
            for a in args:
                _free(a, bound, out)
        case Exists(v, _, body) | Forall(v, _, body):
            _free(body, bound | {v}, out)
        case Divides(_, x):
            _free(x, bound, out)
        case _:
            raise TypeError(f"not an expression: {e!r}")


def all_variables(e: Expr) -> set[str]:
    """Free and bound names, used to pick fresh identifiers."""
    out: set[str] = set()
    for node in walk_expr(e):
        match node:
            case Var(name):
                out.add(name)
            case Exists(v, _, _) | Forall(v, _, _):
                out.add(v)
    return out


def walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    match e:
        case Neg(x) | Not(x) | Divides(_, x):
            yield from walk_expr(x)
        case BinOp(_, l, r) | Cmp(_, l, r) | Implies(l, r):
            yield from walk_expr(l)
            yield from walk_expr(r)
        case And(args) | Or(args):
            for a in args:
                yield from walk_expr(a)
        case Exists(_, _, body) | Forall(_, _, body):
            yield from walk_expr(body)


def fresh_name(base: str, avoid: set[str]) -> str:
    for i in itertools.count(1):
        cand = f"{base}_{i}"
        if cand not in avoid:
            return cand
    raise AssertionError("unreachable")


def expr_kind(e: Expr) -> Optional[str]:
    """Syntactic sort of an expression: 'int', 'bool', 'string' or None for a bare variable."""
    match e:
        case IntLit() | Neg() | BinOp():
            return "int"
        case StrLit():
            return "string"
        case Var():
            return None
        case _:
            return "bool"


def substitute(f: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Capture-avoiding simultaneous substitution of expressions for free variables.

    Raises SortMismatch when a variable in boolean position is replaced by an
    arithmetic expression or vice versa.
    """
    if not bindings:
        return f
    return _subst(f, dict(bindings), "bool" if expr_kind(f) == "bool" else "any")


def _subst(e: Expr, b: dict, ctx: str) -> Expr:
    match e:
        case Var(name):
            if name not in b:
                return e
            rep = b[name]
            kind = expr_kind(rep)
            if ctx == "bool" and kind in ("int", "string"):
                raise SortMismatch(f"cannot substitute {kind} expression for boolean variable {name}")
            if ctx == "int" and kind in ("bool", "string"):
                raise SortMismatch(f"cannot substitute {kind} expression for integer variable {name}")
            return rep
        case IntLit() | BoolLit() | StrLit():
            return e
        case Neg(x):
            return Neg(_subst(x, b, "int"))
        case BinOp(op, l, r):
            return BinOp(op, _subst(l, b, "int"), _subst(r, b, "int"))
        case Cmp(op, l, r):
            inner = "any" if op in ("=", "!=") else "int"
            return Cmp(op, _subst(l, b, inner), _subst(r, b, inner))
        case Not(x):
            return Not(_subst(x, b, "bool"))
        case And(args):
            return And(tuple(_subst(a, b, "bool") for a in args))
        case Or(args):
            return Or(tuple(_subst(a, b, "bool") for a in args))
        case Implies(l, r):
            return Implies(_subst(l, b, "bool"), _subst(r, b, "bool"))
        case Divides(k, x):
            return Divides(k, _subst(x, b, "int"))
        case Exists(v, sort, body) | Forall(v, sort, body):
            inner = {k: val for k, val in b.items() if k != v}
            if not inner:
                return e
            incoming = set()
            for k, val in inner.items():
                if k in free_variables(body):
                    incoming |= free_variables(val)
            if v in incoming:
                avoid = all_variables(body) | incoming | set(inner)
                new = fresh_name(v, avoid)
                body = _subst(body, {v: Var(new)}, "bool")
                v = new
            return type(e)(v, sort, _subst(body, inner, "bool"))
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Shared pieces


@dataclass(frozen=True)
class Param:
    """A recursion value parameter; ``init`` is absent where the syntax has no initialiser."""

    name: str
    sort: Sort
    init: Optional[Expr] = None


@dataclass(frozen=True)
class Arm:
    """One labelled alternative of a branch or selection."""

    label: str
    assertion: Formula
    body: object
    pos: Optional[Pos] = _pos()


# ---------------------------------------------------------------------------
# Global assertions


@dataclass(frozen=True)
class GInteraction:
    sender: str
    receiver: str
    channel: str
    var: str
    sort: Sort
    assertion: Formula
    cont: "Global"
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class GBranch:
    sender: str
    receiver: str
    channel: str
    branch_id: str
    arms: tuple  # of Arm with Global bodies
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class GRec:
    var: str
    params: tuple  # of Param
    invariant: Formula
    body: "Global"
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class GCall:
    var: str
    args: tuple  # of Expr
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class GEnd:
    pos: Optional[Pos] = _pos()


Global = Union[GInteraction, GBranch, GRec, GCall, GEnd]


def global_participants(g: Global) -> list[str]:
    """Participants in order of first appearance."""
    seen: list[str] = []

    def visit(node):
        match node:
            case GInteraction(s, r, _, _, _, _, cont):
                for p in (s, r):
                    if p not in seen:
                        seen.append(p)
                visit(cont)
            case GBranch(s, r, _, _, arms):
                for p in (s, r):
                    if p not in seen:
                        seen.append(p)
                for arm in arms:
                    visit(arm.body)
            case GRec(_, _, _, body):
                visit(body)

    visit(g)
    return seen


# ---------------------------------------------------------------------------
# Local assertions (endpoint types)


@dataclass(frozen=True)
class LSend:
    channel: str
    var: str
    sort: Sort
    assertion: Formula
    cont: "Local"


@dataclass(frozen=True)
class LRecv:
    channel: str
    var: str
    sort: Sort
    assertion: Formula
    cont: "Local"


@dataclass(frozen=True)
class LSelect:
    channel: str
    branch_id: str
    arms: tuple  # of Arm with Local bodies


@dataclass(frozen=True)
class LBranch:
    channel: str
    branch_id: str
    arms: tuple


@dataclass(frozen=True)
class LRec:
    var: str
    params: tuple  # of Param
    invariant: Formula
    body: "Local"


@dataclass(frozen=True)
class LCall:
    var: str
    args: tuple


@dataclass(frozen=True)
class LEnd:
    pass


@dataclass(frozen=True)
class Bottom:
    """Both endpoints of a binary session composed away."""


Local = Union[LSend, LRecv, LSelect, LBranch, LRec, LCall, LEnd, Bottom]


# ---------------------------------------------------------------------------
# Processes


@dataclass(frozen=True)
class PInit:
    service: str
    participants: tuple
    channels: tuple
    body: "Process"
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PJoin:
    service: str
    participant: str
    channels: tuple
    body: "Process"
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PSend:
    channel: str
    expr: Expr
    var: str
    sort: Sort
    assertion: Formula
    body: "Process"
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PRecv:
    channel: str
    var: str
    sort: Sort
    assertion: Formula
    body: "Process"
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PSelect:
    channel: str
    assertion: Formula
    branch_id: str
    label: str
    body: "Process"
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PBranch:
    channel: str
    branch_id: str
    arms: tuple  # of Arm with Process bodies
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PIf:
    cond: Expr
    then: "Process"
    else_: "Process"
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PRec:
    var: str
    args: tuple  # initial values
    chan_args: tuple
    params: tuple  # of Param (init unused)
    chan_params: tuple
    body: "Process"
    invariant: Formula = TRUE
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PCall:
    var: str
    args: tuple
    chan_args: tuple
    pos: Optional[Pos] = _pos()


@dataclass(frozen=True)
class PInact:
    pos: Optional[Pos] = _pos()


Process = Union[PInit, PJoin, PSend, PRecv, PSelect, PBranch, PIf, PRec, PCall, PInact]


def strip_assertions_global(g: Global) -> Global:
    """Replace every assertion and invariant with ``true``."""
    match g:
        case GInteraction():
            return GInteraction(g.sender, g.receiver, g.channel, g.var, g.sort, TRUE,
                                strip_assertions_global(g.cont), pos=g.pos)
        case GBranch():
            arms = tuple(Arm(a.label, TRUE, strip_assertions_global(a.body), pos=a.pos) for a in g.arms)
            return GBranch(g.sender, g.receiver, g.channel, g.branch_id, arms, pos=g.pos)
        case GRec():
            return GRec(g.var, g.params, TRUE, strip_assertions_global(g.body), pos=g.pos)
    return g


def strip_assertions_process(p: Process) -> Process:
    match p:
        case PInit() | PJoin():
            return replace(p, body=strip_assertions_process(p.body))
        case PSend() | PRecv():
            return replace(p, assertion=TRUE, body=strip_assertions_process(p.body))
        case PSelect():
            return replace(p, assertion=TRUE, body=strip_assertions_process(p.body))
        case PBranch():
            arms = tuple(Arm(a.label, TRUE, strip_assertions_process(a.body), pos=a.pos) for a in p.arms)
            return replace(p, arms=arms)
        case PIf():
            return replace(p, then=strip_assertions_process(p.then),
                            else_=strip_assertions_process(p.else_))
        case PRec():
            return replace(p, invariant=TRUE, body=strip_assertions_process(p.body))
    return p


def strip_assertions_local(t: Local) -> Local:
    match t:
        case LSend() | LRecv():
            return type(t)(t.channel, t.var, t.sort, TRUE, strip_assertions_local(t.cont))
        case LSelect() | LBranch():
            arms = tuple(Arm(a.label, TRUE, strip_assertions_local(a.body)) for a in t.arms)
            return type(t)(t.channel, t.branch_id, arms)
        case LRec():
            return LRec(t.var, t.params, TRUE, strip_assertions_local(t.body))
    return t
