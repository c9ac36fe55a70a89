"""Parse-time sort checking of global descriptions, processes and formulas."""
from __future__ import annotations

from typing import Optional

from .diagnostics import DuplicateLabel, SortError, UnknownRecursionVariable, WellFormednessError
from .model import (
    And, BinOp, BoolLit, Cmp, Divides, Exists, Forall, GBranch, GCall, GInteraction, GRec,
    Implies, IntLit, Neg, Not, Or, PBranch, PCall, PIf, PInit, PJoin, PRec, PRecv, PSelect,
    PSend, Pos, Sort, StrLit, Var, free_variables,
)


def compatible(a: Sort, b: Sort) -> bool:
    return a == b or {a, b} == {Sort.STRING, Sort.DATE}


class _Checker:
    def __init__(self, pos: Optional[Pos], assertion: bool, infer: bool = False):
        self.pos = pos
        self.assertion = assertion
        self.infer = infer

    @property
    def what(self) -> str:
        return "assertion" if self.assertion else "expression"

    def expect(self, e, sort: Sort, env: dict) -> None:
        found = self.sort(e, env, want=sort)
        if not compatible(found, sort):
            raise SortError(self.pos, str(sort), f"{found} ({_brief(e)})", self.what)

    def sort(self, e, env: dict, want: Optional[Sort] = None) -> Sort:
        match e:
            case IntLit():
                return Sort.INT
            case BoolLit():
                return Sort.BOOL
            case StrLit():
                if self.assertion:
                    raise SortError(self.pos, "int or bool", "string literal", "assertion")
                return Sort.STRING
            case Var(name):
                if name in env:
                    s = env[name]
                elif self.infer:
                    s = want if want is not None else Sort.INT
                    env[name] = s
                else:
                    raise SortError(self.pos, "a bound variable", f"unknown variable '{name}'", self.what)
                if self.assertion and not s.assertable:
                    raise SortError(self.pos, "int or bool", f"{s} variable '{name}'", "assertion")
                return s
            case Neg(x):
                self.expect(x, Sort.INT, env)
                return Sort.INT
            case BinOp(op, l, r):
                self.expect(l, Sort.INT, env)
                self.expect(r, Sort.INT, env)
                if op == "*" and free_variables(l) and free_variables(r):
                    raise SortError(self.pos, "a constant factor", f"product of variables ({_brief(e)})", self.what)
                if op == "/" and not (isinstance(r, IntLit) and r.value > 0):
                    raise SortError(self.pos, "a positive integer literal divisor", _brief(r), self.what)
                return Sort.INT
            case Cmp(op, l, r):
                if op in ("=", "!="):
                    if self.infer and isinstance(l, Var) and l.name not in env:
                        rs = self.sort(r, env)
                        ls = self.sort(l, env, want=rs)
                    else:
                        ls = self.sort(l, env)
                        rs = self.sort(r, env, want=ls)
                    if not compatible(ls, rs):
                        raise SortError(self.pos, str(ls), f"{rs} ({_brief(r)})", self.what)
                else:
                    self.expect(l, Sort.INT, env)
                    self.expect(r, Sort.INT, env)
                return Sort.BOOL
            case Not(x):
                self.expect(x, Sort.BOOL, env)
                return Sort.BOOL
            case And(args) | Or(args):
                for a in args:
                    self.expect(a, Sort.BOOL, env)
                return Sort.BOOL
            case Implies(l, r):
                self.expect(l, Sort.BOOL, env)
                self.expect(r, Sort.BOOL, env)
                return Sort.BOOL
            case Exists(v, s, body) | Forall(v, s, body):
                if not s.assertable:
                    raise SortError(self.pos, "int or bool", f"quantified {s} variable '{v}'", "assertion")
                inner = dict(env)
                inner[v] = s
                self.expect(body, Sort.BOOL, inner)
                if self.infer:
                    for k, val in inner.items():
                        if k != v and k not in env:
                            env[k] = val
                return Sort.BOOL
            case Divides(_, x):
                self.expect(x, Sort.INT, env)
                return Sort.BOOL
        raise TypeError(f"not an expression: {e!r}")


def _brief(e) -> str:
    from .printer import show_expr
    return show_expr(e, spaced=True)


def check_formula(f, env: dict, pos: Optional[Pos]) -> None:
    _Checker(pos, assertion=True).expect(f, Sort.BOOL, dict(env))


def check_expr(e, env: dict, pos: Optional[Pos]) -> Sort:
    return _Checker(pos, assertion=False).sort(e, dict(env))


def infer_formula_sorts(f, pos: Optional[Pos] = None) -> dict:
    """Sorts of the free variables of a standalone formula, inferred from usage."""
    env: dict = {}
    _Checker(pos, assertion=True, infer=True).expect(f, Sort.BOOL, env)
    return env


def check_formula_shape(f, pos: Optional[Pos]) -> None:
    infer_formula_sorts(f, pos)


def _bind(env: dict, name: str, sort: Sort, pos) -> dict:
    if name in env:
        raise WellFormednessError(f"variable '{name}' is already bound on this path", pos)
    out = dict(env)
    out[name] = sort
    return out


def _distinct_labels(arms) -> None:
    seen = set()
    for arm in arms:
        if arm.label in seen:
            raise DuplicateLabel(arm.pos, arm.label)
        seen.add(arm.label)


def check_global(g, env: Optional[dict] = None, recs: Optional[dict] = None) -> None:
    env = env or {}
    recs = recs or {}
    while True:
        match g:
            case GInteraction(s, r, _, var, sort, a, cont):
                if s == r:
                    raise WellFormednessError(f"participant '{s}' sends to itself", g.pos)
                env = _bind(env, var, sort, g.pos)
                check_formula(a, env, g.pos)
                g = cont
            case GBranch(s, r, _, _, arms):
                if s == r:
                    raise WellFormednessError(f"participant '{s}' sends to itself", g.pos)
                _distinct_labels(arms)
                for arm in arms:
                    check_formula(arm.assertion, env, arm.pos or g.pos)
                    check_global(arm.body, env, recs)
                return
            case GRec(var, params, inv, body):
                inner = env
                for p in params:
                    check_formula_sorted(p.init, p.sort, env, g.pos)
                    inner = _bind(inner, p.name, p.sort, g.pos)
                check_formula(inv, inner, g.pos)
                recs = dict(recs)
                recs[var] = params
                env = inner
                g = body
            case GCall(var, args):
                if var not in recs:
                    raise UnknownRecursionVariable(g.pos, var)
                params = recs[var]
                if len(args) != len(params):
                    raise WellFormednessError(
                        f"call of '{var}' passes {len(args)} values, expected {len(params)}", g.pos)
                for a, p in zip(args, params):
                    check_formula_sorted(a, p.sort, env, g.pos)
                return
            case _:
                return


def check_formula_sorted(e, sort: Sort, env: dict, pos) -> None:
    """An expression that will be substituted into assertions: must have ``sort``."""
    _Checker(pos, assertion=sort.assertable).expect(e, sort, dict(env))


def check_process(p, env: Optional[dict] = None, recs: Optional[set] = None) -> None:
    env = env or {}
    recs = recs or set()
    while True:
        match p:
            case PInit(_, parts, chans, body) | PJoin(_, parts, chans, body):
                if len(set(chans)) != len(chans):
                    raise WellFormednessError("session channels must be distinct", p.pos)
                if isinstance(p, PInit) and len(set(parts)) != len(parts):
                    raise WellFormednessError("session participants must be distinct", p.pos)
                p = body
            case PSend(_, e, var, sort, a, body):
                found = check_expr(e, env, p.pos)
                if not compatible(found, sort):
                    raise SortError(p.pos, str(sort), f"{found} ({_brief(e)})", "payload")
                if sort.assertable:
                    # the sent value gets substituted into assertions, keep it linear
                    check_formula_sorted(e, sort, env, p.pos)
                env = _bind(env, var, sort, p.pos)
                check_formula(a, env, p.pos)
                p = body
            case PRecv(_, var, sort, a, body):
                env = _bind(env, var, sort, p.pos)
                check_formula(a, env, p.pos)
                p = body
            case PSelect(_, a, _, _, body):
                check_formula(a, env, p.pos)
                p = body
            case PBranch(_, _, arms):
                _distinct_labels(arms)
                for arm in arms:
                    check_formula(arm.assertion, env, arm.pos or p.pos)
                    check_process(arm.body, env, recs)
                return
            case PIf(cond, then, else_):
                _Checker(p.pos, assertion=False).expect(cond, Sort.BOOL, dict(env))
                check_process(then, env, recs)
                check_process(else_, env, recs)
                return
            case PRec(var, args, _, params, chan_params, body, inv):
                for a in args:
                    check_expr(a, env, p.pos)
                if len(set(chan_params)) != len(chan_params):
                    raise WellFormednessError("channel parameters must be distinct", p.pos)
                inner = env
                for prm in params:
                    inner = _bind(inner, prm.name, prm.sort, p.pos)
                check_formula(inv, inner, p.pos)
                recs = recs | {var}
                env = inner
                p = body
            case PCall(var, args, _):
                if var not in recs:
                    raise UnknownRecursionVariable(p.pos, var)
                for a in args:
                    check_expr(a, env, p.pos)
                return
            case _:
                return
