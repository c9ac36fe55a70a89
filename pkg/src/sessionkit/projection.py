"""Projection of global descriptions onto single participants.

A sender keeps the interaction's assertion as its guarantee. A receiver gets
a rely: the interaction's assertion conjoined with the earlier assertions of
the path (most recent first), with every variable it does not know
existentially quantified, most recently introduced outermost.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .diagnostics import UnmergeableBranches
from .model import (
    Arm, GBranch, GCall, GInteraction, GRec, LBranch, LCall, LEnd, LRec, LRecv, LSelect, LSend,
    Param, Var, conj, disj, exists_many, free_variables, global_participants, substitute,
)


@dataclass(frozen=True)
class _State:
    priors: tuple = ()   # assertions seen on the path, oldest first
    intro: tuple = ()    # (variable, sort) in order of introduction
    known: frozenset = frozenset()
    path: tuple = ()

    def assume(self, f) -> "_State":
        return _State(self.priors + (f,), self.intro, self.known, self.path)

    def introduce(self, var, sort, knows: bool) -> "_State":
        known = self.known | {var} if knows else self.known
        return _State(self.priors, self.intro + ((var, sort),), known, self.path)

    def step(self, text: str) -> "_State":
        return _State(self.priors, self.intro, self.known, self.path + (text,))

    def rely(self, f):
        return self.hide(conj(f, *reversed(self.priors)))

    def hide(self, body):
        free = free_variables(body)
        hidden = [(v, s) for v, s in reversed(self.intro)
                  if v in free and v not in self.known and s.assertable]
        return exists_many(hidden, body)


def project(g, p: str):
    """The local assertion of participant ``p``."""
    return _project(g, p, _State(), frozenset())


def project_all(g) -> list:
    """(participant, local assertion) pairs in order of first appearance."""
    return [(p, project(g, p)) for p in global_participants(g)]


def _project(g, p, st: _State, as_end: frozenset):
    match g:
        case GInteraction(s, r, ch, var, sort, a, cont):
            st = st.step(f"{s}->{r}:{ch}")
            if p == s:
                nxt = st.introduce(var, sort, True).assume(a)
                return LSend(ch, var, sort, a, _project(cont, p, nxt, as_end))
            if p == r:
                after = st.introduce(var, sort, True)
                rely = after.rely(a)
                return LRecv(ch, var, sort, rely, _project(cont, p, after.assume(a), as_end))
            return _project(cont, p, st.introduce(var, sort, False).assume(a), as_end)
        case GBranch(s, r, ch, bid, arms):
            st = st.step(f"{s}->{r}:{ch}&{bid}")
            if p == s:
                out = tuple(Arm(arm.label, arm.assertion,
                                _project(arm.body, p, st.assume(arm.assertion), as_end)) for arm in arms)
                return LSelect(ch, bid, out)
            if p == r:
                out = tuple(Arm(arm.label, st.rely(arm.assertion),
                                _project(arm.body, p, st.assume(arm.assertion), as_end)) for arm in arms)
                return LBranch(ch, bid, out)
            joined = st.assume(disj(*(arm.assertion for arm in arms)))
            results = [_project(arm.body, p, joined.step(arm.label), as_end) for arm in arms]
            canon = _alpha_normal(results[0])
            if any(_alpha_normal(res) != canon for res in results[1:]):
                raise UnmergeableBranches(p, " / ".join(st.path))
            return results[0]
        case GRec(t, params, inv, body):
            st = st.step(f"mu {t}")
            inside = p in global_participants(body)
            for prm in params:
                st = st.introduce(prm.name, prm.sort, inside)
            if not inside:
                return _project(body, p, st.assume(inv), as_end | {t})
            local_inv = st.hide(inv)
            inner = st.assume(inv)
            return LRec(t, tuple(Param(x.name, x.sort, x.init) for x in params), local_inv,
                        _project(body, p, inner, as_end - {t}))
        case GCall(t, args):
            if t in as_end:
                return LEnd()
            return LCall(t, args)
    return LEnd()


def _alpha_normal(t):
    """``t`` with payload and recursion variables renamed canonically, for comparison only."""
    return _alpha(t, {}, itertools.count())


def _alpha(t, ren: dict, counter):
    match t:
        case LSend(ch, v, sort, a, cont) | LRecv(ch, v, sort, a, cont):
            inner = {**ren, v: Var(f"'{next(counter)}")}
            return type(t)(ch, inner[v].name, sort, substitute(a, inner), _alpha(cont, inner, counter))
        case LSelect(ch, bid, arms) | LBranch(ch, bid, arms):
            return type(t)(ch, bid, tuple(Arm(arm.label, substitute(arm.assertion, ren),
                                              _alpha(arm.body, ren, counter)) for arm in arms))
        case LRec(var, params, inv, body):
            inner = {**ren, **{prm.name: Var(f"'{next(counter)}") for prm in params}}
            new = tuple(Param(inner[prm.name].name, prm.sort,
                              None if prm.init is None else substitute(prm.init, ren)) for prm in params)
            return LRec(var, new, substitute(inv, inner), _alpha(body, inner, counter))
        case LCall(var, args):
            return LCall(var, tuple(substitute(a, ren) for a in args))
    return t
