"""Assertion-free reference implementations: projection and process typing.

Both produce plain nested tuples so they share no code with the package:
``("!", ch, sort, T)``, ``("?", ch, sort, T)``, ``("+", ch, id, ((label, T), ...))``,
``("&", ch, id, ((label, T), ...))``, ``("mu", t, T)``, ``("call", t)``, ``("end",)``.
"""
import random

from sessionkit.model import (
    Arm, BoolLit, Bottom, GBranch, GCall, GEnd, GInteraction, GRec, IntLit, LBranch, LCall, LEnd,
    LRec, LRecv, LSelect, LSend, Param, PBranch, PCall, PIf, PInact, PInit, PJoin, PRec, PRecv,
    PSelect, PSend, Sort, StrLit, TRUE, Var,
)


class NotMergeable(Exception):
    pass


def _roles(g, acc):
    if isinstance(g, GInteraction):
        acc |= {g.sender, g.receiver}
        _roles(g.cont, acc)
    elif isinstance(g, GBranch):
        acc |= {g.sender, g.receiver}
        for arm in g.arms:
            _roles(arm.body, acc)
    elif isinstance(g, GRec):
        _roles(g.body, acc)
    return acc


def plain_project(g, p, dead=frozenset()):
    if isinstance(g, GInteraction):
        rest = plain_project(g.cont, p, dead)
        if p == g.sender:
            return ("!", g.channel, g.sort.value, rest)
        if p == g.receiver:
            return ("?", g.channel, g.sort.value, rest)
        return rest
    if isinstance(g, GBranch):
        arms = tuple(sorted((a.label, plain_project(a.body, p, dead)) for a in g.arms))
        if p == g.sender:
            return ("+", g.channel, g.branch_id, arms)
        if p == g.receiver:
            return ("&", g.channel, g.branch_id, arms)
        bodies = {body for _, body in arms}
        if len(bodies) != 1:
            raise NotMergeable(p)
        return bodies.pop()
    if isinstance(g, GRec):
        if p not in _roles(g.body, set()):
            return plain_project(g.body, p, dead | {g.var})
        return ("mu", g.var, plain_project(g.body, p, dead - {g.var}))
    if isinstance(g, GCall):
        return ("end",) if g.var in dead else ("call", g.var)
    return ("end",)


def plain_type(p):
    """Session type of a process body, ignoring assertions and payload names."""
    if isinstance(p, (PInit, PJoin)):
        return plain_type(p.body)
    if isinstance(p, PSend):
        return ("!", p.channel, p.sort.value, plain_type(p.body))
    if isinstance(p, PRecv):
        return ("?", p.channel, p.sort.value, plain_type(p.body))
    if isinstance(p, PSelect):
        return ("+", p.channel, p.branch_id, ((p.label, plain_type(p.body)),))
    if isinstance(p, PBranch):
        return ("&", p.channel, p.branch_id, tuple(sorted((a.label, plain_type(a.body)) for a in p.arms)))
    if isinstance(p, PIf):
        a, b = plain_type(p.then), plain_type(p.else_)
        if a == b:
            return a
        if a[0] == b[0] == "+" and a[1:3] == b[1:3]:
            labels = dict(a[3])
            for label, t in b[3]:
                if labels.get(label, t) != t:
                    raise ValueError("conditional arms disagree")
                labels[label] = t
            return ("+", a[1], a[2], tuple(sorted(labels.items())))
        raise ValueError("conditional arms disagree")
    if isinstance(p, PRec):
        return ("mu", p.var, plain_type(p.body))
    if isinstance(p, PCall):
        return ("call", p.var)
    return ("end",)


def shape(t):
    """The package's local types in the oracle's tuple form."""
    match t:
        case LSend(ch, _, sort, _, cont):
            return ("!", ch, sort.value, shape(cont))
        case LRecv(ch, _, sort, _, cont):
            return ("?", ch, sort.value, shape(cont))
        case LSelect(ch, bid, arms):
            return ("+", ch, bid, tuple(sorted((a.label, shape(a.body)) for a in arms)))
        case LBranch(ch, bid, arms):
            return ("&", ch, bid, tuple(sorted((a.label, shape(a.body)) for a in arms)))
        case LRec(var, _, _, body):
            return ("mu", var, shape(body))
        case LCall(var, _):
            return ("call", var)
        case LEnd():
            return ("end",)
        case Bottom():
            return ("bot",)
    raise TypeError(t)


# ---------------------------------------------------------------------------
# generators

ROLES = ("A", "B", "C")
CHANNELS = ("k", "l")
LABELS = ("ok", "ko", "retry")
SORTS = (Sort.INT, Sort.BOOL, Sort.STRING)


def random_global(rng: random.Random, depth: int = 4):
    counter = iter(range(10_000))

    def pair():
        s, r = rng.sample(ROLES, 2)
        return s, r, rng.choice(CHANNELS)

    def gen(d, recs):
        roll = rng.random()
        if d == 0 or roll < 0.12:
            if recs and rng.random() < 0.6:
                t = rng.choice(recs)
                return GCall(t, (Var(f"i{t[1:]}"),))
            return GEnd()
        if roll < 0.6:
            s, r, k = pair()
            n = next(counter)
            return GInteraction(s, r, k, f"v{n}", rng.choice(SORTS), TRUE, gen(d - 1, recs))
        if roll < 0.85:
            s, r, k = pair()
            labels = rng.sample(LABELS, rng.randint(1, 3))
            arms = tuple(Arm(lbl, TRUE, gen(d - 1, recs)) for lbl in labels)
            return GBranch(s, r, k, f"b{next(counter)}", arms)
        n = next(counter)
        t = f"t{n}"
        return GRec(t, (Param(f"i{n}", Sort.INT, IntLit(0)),), TRUE, gen(d - 1, recs + [t]))

    return gen(depth, [])


def process_for(local, role, service, roles, channels, init: bool):
    """A process realising ``local``: the simplest implementation of a plain local type."""
    def lit(sort):
        return {Sort.INT: IntLit(1), Sort.BOOL: BoolLit(True)}.get(sort, StrLit("s"))

    def go(t):
        match t:
            case LSend(ch, v, sort, _, cont):
                return PSend(ch, lit(sort), v, sort, TRUE, go(cont))
            case LRecv(ch, v, sort, _, cont):
                return PRecv(ch, v, sort, TRUE, go(cont))
            case LSelect(ch, bid, arms):
                out = PSelect(ch, TRUE, bid, arms[-1].label, go(arms[-1].body))
                for arm in reversed(arms[:-1]):
                    out = PIf(BoolLit(True), PSelect(ch, TRUE, bid, arm.label, go(arm.body)), out)
                return out
            case LBranch(ch, bid, arms):
                return PBranch(ch, bid, tuple(Arm(a.label, TRUE, go(a.body)) for a in arms))
            case LRec(var, params, _, body):
                return PRec(var, tuple(p.init for p in params), (), tuple(Param(p.name, p.sort) for p in params),
                            (), go(body), TRUE)
            case LCall(var, args):
                return PCall(var, args, ())
        return PInact()

    body = go(local)
    if init:
        return PInit(service, (role,) + tuple(r for r in roles if r != role), channels, body)
    return PJoin(service, role, channels, body)
