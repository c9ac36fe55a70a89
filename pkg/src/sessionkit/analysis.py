"""Checks on a global description: one-time unfolding, linearity and well-assertedness."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import presburger
from .diagnostics import CheckReport
from .model import (
    Arm, Exists, GBranch, GCall, GInteraction, GRec, Param, Pos, TRUE, conj, disj,
    free_variables, global_participants, substitute,
)
from .printer import show_formula

II, IO, OO = "II", "IO", "OO"


# ---------------------------------------------------------------------------
# unfolding


def unfold_once(g):
    """Replace each recursion call by one copy of its recursion (calls in the copy stay)."""
    match g:
        case GInteraction():
            return GInteraction(g.sender, g.receiver, g.channel, g.var, g.sort, g.assertion,
                                unfold_once(g.cont), pos=g.pos)
        case GBranch():
            arms = tuple(Arm(a.label, a.assertion, unfold_once(a.body), pos=a.pos) for a in g.arms)
            return GBranch(g.sender, g.receiver, g.channel, g.branch_id, arms, pos=g.pos)
        case GRec(t, params, inv, body):
            def copy(call):
                inits = tuple(Param(p.name, p.sort, a) for p, a in zip(params, call.args))
                return GRec(t, inits, inv, body, pos=g.pos)
            return GRec(t, params, inv, _replace_calls(unfold_once(body), t, copy), pos=g.pos)
    return g


def _replace_calls(g, t, fn):
    match g:
        case GInteraction():
            return GInteraction(g.sender, g.receiver, g.channel, g.var, g.sort, g.assertion,
                                _replace_calls(g.cont, t, fn), pos=g.pos)
        case GBranch():
            arms = tuple(Arm(a.label, a.assertion, _replace_calls(a.body, t, fn), pos=a.pos) for a in g.arms)
            return GBranch(g.sender, g.receiver, g.channel, g.branch_id, arms, pos=g.pos)
        case GRec(var, params, inv, body):
            if var == t:  # shadowed
                return g
            return GRec(var, params, inv, _replace_calls(body, t, fn), pos=g.pos)
        case GCall(var, _):
            return fn(g) if var == t else g
    return g


# ---------------------------------------------------------------------------
# linearity


@dataclass(frozen=True)
class Prefix:
    sender: str
    receiver: str
    channel: str
    position: int
    pos: Optional[Pos] = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.sender}->{self.receiver}:{self.channel}"


def dependencies(p1: Prefix, p2: Prefix) -> set:
    """Input/output dependencies from an earlier prefix ``p1`` to a later ``p2``."""
    if not p1.position < p2.position:
        raise ValueError("dependencies are defined from an earlier prefix to a later one")
    out = set()
    same_chan = p1.channel == p2.channel
    if p1.receiver == p2.receiver and (not same_chan or p1.sender == p2.sender):
        out.add(II)
    if p1.receiver == p2.sender and not same_chan:
        out.add(IO)
    if p1.sender == p2.sender and same_chan:
        out.add(OO)
    return out


def _path_step(g) -> str:
    match g:
        case GInteraction():
            return f"{g.sender}->{g.receiver}:{g.channel}"
        case GBranch():
            return f"{g.sender}->{g.receiver}:{g.channel}&{g.branch_id}"
        case GRec():
            return f"mu {g.var}"
    return ""


def _join(path: tuple) -> str:
    return " / ".join(path)


def check_linearity(g) -> CheckReport:
    """Channel uses on every branch-consistent path must be ordered by dependency chains.

    ``g`` is expected to be unfolded once already; calls are read as ``end``.
    For two prefixes ``n1 < n2`` on a common channel this requires an output
    chain (IO/OO edges) from ``n1`` to ``n2`` and an input chain: either the two
    inputs happen at the same receiver, or a chain of II/IO edges ending with II.
    """
    report = CheckReport()
    seen = set()
    stack: list[Prefix] = []
    out_reach: list[list[bool]] = []   # out_reach[j][i]: IO/OO chain i ~> j
    any_reach: list[list[bool]] = []   # II/IO chain i ~> j

    def push(p: Prefix, path):
        j = len(stack)
        o, a, ii = [], [], []  # ii[i]: II/IO chain i ~> j whose last edge is II
        for i, q in enumerate(stack):
            d = dependencies(q, p)
            oo = bool(d & {IO, OO}) or any(out_reach[m][i] and (dependencies(stack[m], p) & {IO, OO})
                                          for m in range(i + 1, j))
            direct_ii = II in d
            via = [m for m in range(i + 1, j) if any_reach[m][i]]
            aa = bool(d & {II, IO}) or any(dependencies(stack[m], p) & {II, IO} for m in via)
            iii = direct_ii or any(II in dependencies(stack[m], p) for m in via)
            o.append(oo)
            a.append(aa)
            ii.append(iii)
        for i, q in enumerate(stack):
            if q.channel != p.channel:
                continue
            problems = []
            if not o[i]:
                problems.append("no output dependency chain")
            if not (ii[i] or q.receiver == p.receiver):
                problems.append("no input dependency chain")
            if problems:
                key = (q.pos, p.pos, q.position, str(q), str(p))
                if key in seen:
                    continue
                seen.add(key)
                report.add("Linearity", _join(path),
                           f"uses of channel {p.channel} by {q} and {p} are not ordered ({', '.join(problems)})",
                           p.pos.line if p.pos else None, first=str(q), second=str(p))
        stack.append(p)
        out_reach.append(o)
        any_reach.append(a)

    def pop():
        stack.pop()
        out_reach.pop()
        any_reach.pop()

    def visit(node, path):
        match node:
            case GInteraction():
                path = path + (_path_step(node),)
                push(Prefix(node.sender, node.receiver, node.channel, len(stack), node.pos), path)
                visit(node.cont, path)
                pop()
            case GBranch():
                step = _path_step(node)
                push(Prefix(node.sender, node.receiver, node.channel, len(stack), node.pos), path + (step,))
                for arm in node.arms:
                    visit(arm.body, path + (f"{step}.{arm.label}",))
                pop()
            case GRec():
                visit(node.body, path + (_path_step(node),))

    visit(g, ())
    return report


def prefixes_along(g) -> list[list[Prefix]]:
    """All prefix sequences of branch-consistent paths (calls read as ``end``)."""
    out = []

    def visit(node, acc):
        match node:
            case GInteraction():
                visit(node.cont, acc + [Prefix(node.sender, node.receiver, node.channel, len(acc), node.pos)])
            case GBranch():
                acc = acc + [Prefix(node.sender, node.receiver, node.channel, len(acc), node.pos)]
                for arm in node.arms:
                    visit(arm.body, acc)
            case GRec():
                visit(node.body, acc)
            case _:
                out.append(acc)

    visit(g, [])
    return out


# ---------------------------------------------------------------------------
# well-assertedness


@dataclass(frozen=True)
class KnowledgeMap:
    """Variables each participant has sent, received or owns as a recursion formal."""

    known: tuple = ()  # sorted (participant, frozenset) pairs

    def of(self, p: str) -> frozenset:
        return dict(self.known).get(p, frozenset())

    def learn(self, p: str, names) -> "KnowledgeMap":
        d = dict(self.known)
        d[p] = d.get(p, frozenset()) | frozenset(names)
        return KnowledgeMap(tuple(sorted(d.items())))


def check_well_asserted(g) -> CheckReport:
    """History sensitivity, temporal satisfiability and recursion invariants."""
    report = CheckReport()
    recs: dict = {}

    def line(node):
        return node.pos.line if node.pos else None

    def history(node, who, f, knowledge, extra, path):
        unknown = sorted(free_variables(f) - knowledge.of(who) - set(extra))
        for v in unknown:
            report.add("HistorySensitivity", _join(path),
                       f"{who} asserts on '{v}' which it does not know", line(node), variable=v, participant=who)

    def valid(ctx, goal, kind, node, path, what):
        if not presburger.implies(ctx, goal):
            report.add(kind, _join(path),
                       f"{what}: {show_formula(ctx, spaced=True)} => {show_formula(goal, spaced=True)} is not valid",
                       line(node))

    def visit(node, ctx, knowledge: KnowledgeMap, path):
        match node:
            case GInteraction(s, r, _, var, sort, a, cont):
                path = path + (_path_step(node),)
                history(node, s, a, knowledge, [var], path)
                goal = Exists(var, sort, a) if sort.assertable and var in free_variables(a) else a
                valid(ctx, goal, "TemporalSatisfiability", node, path, "the sender cannot satisfy its assertion")
                knowledge = knowledge.learn(s, [var]).learn(r, [var])
                visit(cont, conj(ctx, a), knowledge, path)
            case GBranch(s, r, _, _, arms):
                step = _path_step(node)
                for arm in arms:
                    history(arm, s, arm.assertion, knowledge, [], path + (f"{step}.{arm.label}",))
                valid(ctx, disj(*(a.assertion for a in arms)), "TemporalSatisfiability", node,
                      path + (step,), "no label can be selected")
                for arm in arms:
                    visit(arm.body, conj(ctx, arm.assertion), knowledge, path + (f"{step}.{arm.label}",))
            case GRec(t, params, inv, body):
                path = path + (_path_step(node),)
                members = global_participants(body)
                for p in params:
                    for who in members:
                        history(node, who, p.init, knowledge, [], path)
                entry = substitute(inv, {p.name: p.init for p in params})
                valid(ctx, entry, "InvariantUnsatisfied", node, path, "the invariant does not hold on entry")
                recs[t] = (params, inv, members)
                inner = knowledge
                for who in members:
                    inner = inner.learn(who, [p.name for p in params])
                visit(body, conj(ctx, inv), inner, path)
            case GCall(t, args):
                params, inv, members = recs[t]
                for a in args:
                    for who in members:
                        history(node, who, a, knowledge, [], path)
                goal = substitute(inv, {p.name: a for p, a in zip(params, args)})
                valid(ctx, goal, "InvariantUnsatisfied", node, path + (f"{t}(...)",),
                      "the invariant does not hold at the recursive call")

    visit(g, TRUE, KnowledgeMap(), ())
    return report

