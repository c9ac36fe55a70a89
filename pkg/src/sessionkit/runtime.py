"""Interpreter for verified systems: one coroutine per participant, FIFO string channels.

Each participant runs as a generator that yields the communication it wants
to perform; a cooperative scheduler (round-robin or seeded random) picks a
participant whose request can proceed, performs it and records a trace event.
"""
from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import presburger
from .model import (
    And, BinOp, BoolLit, Cmp, Exists, Forall, Implies, IntLit, Neg, Not, Or, PBranch, PCall,
    PIf, PInact, PInit, PJoin, PRec, PRecv, PSelect, PSend, Sort, StrLit, Var, substitute,
    walk_expr,
)
from .printer import show_formula


class ValueDecodeError(Exception):
    pass


class Deadlock(Exception):
    def __init__(self, blocked: dict, trace):
        waiting = ", ".join(f"{p} on {w}" for p, w in blocked.items())
        super().__init__(f"deadlock: {waiting}")
        self.blocked = blocked
        self.trace = trace


class MonitorViolation(Exception):
    def __init__(self, participant: str, path: str, assertion, store: dict):
        super().__init__(f"assertion {show_formula(assertion, spaced=True)} violated by {participant} "
                         f"at {path} with {_show_store(store)}")
        self.participant = participant
        self.path = path
        self.assertion = assertion
        self.store = dict(store)


class StepLimitExceeded(Exception):
    pass


def _show_store(store: dict) -> str:
    return "{" + ", ".join(f"{k}={serialize_value(v)}" for k, v in sorted(store.items())) + "}"


# ---------------------------------------------------------------------------
# values on the wire


def serialize_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    raise TypeError(f"cannot serialize {v!r}")


def deserialize_value(s: str, sort: Sort):
    if sort == Sort.INT:
        text = s.strip()
        if text != s or not text.lstrip("-").isdigit():
            raise ValueDecodeError(f"not an integer: {s!r}")
        return int(text)
    if sort == Sort.BOOL:
        if s not in ("true", "false"):
            raise ValueDecodeError(f"not a boolean: {s!r}")
        return s == "true"
    try:
        v = json.loads(s)
    except json.JSONDecodeError as err:
        raise ValueDecodeError(f"not a quoted string: {s!r}") from err
    if not isinstance(v, str):
        raise ValueDecodeError(f"not a quoted string: {s!r}")
    return v


def serialize_label(branch_id: str, label: str) -> str:
    return branch_id + label


def deserialize_label(s: str, branch_id: str, labels) -> str:
    for label in labels:
        if s == branch_id + label:
            return label
    raise ValueDecodeError(f"unexpected label {s!r} for branch group {branch_id}")


# ---------------------------------------------------------------------------
# expressions


def evaluate(e, store: dict):
    match e:
        case IntLit(v) | BoolLit(v) | StrLit(v):
            return v
        case Var(name):
            if name not in store:
                raise KeyError(f"unbound variable {name}")
            return store[name]
        case Neg(x):
            return -evaluate(x, store)
        case BinOp(op, l, r):
            a, b = evaluate(l, store), evaluate(r, store)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            return a // b
        case Cmp(op, l, r):
            a, b = evaluate(l, store), evaluate(r, store)
            return {"=": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
        case Not(x):
            return not evaluate(x, store)
        case And(args):
            return all(evaluate(a, store) for a in args)
        case Or(args):
            return any(evaluate(a, store) for a in args)
        case Implies(l, r):
            return (not evaluate(l, store)) or evaluate(r, store)
        case Exists() | Forall():
            return _quantified_truth(e, store)
    raise TypeError(f"cannot evaluate {e!r}")


def _literal(v):
    return BoolLit(v) if isinstance(v, bool) else IntLit(v)


def _quantified_truth(f, store: dict) -> bool:
    ground = substitute(f, {k: _literal(v) for k, v in store.items() if not isinstance(v, str)})
    return presburger.is_valid(ground)


def holds(f, store: dict) -> bool:
    if any(isinstance(n, (Exists, Forall)) for n in walk_expr(f)):
        return _quantified_truth(f, store)
    return bool(evaluate(f, store))


# ---------------------------------------------------------------------------
# trace


@dataclass(frozen=True)
class TraceEvent:
    step: int
    participant: str
    action: str  # send, receive, select, branch, recCall, end
    channel: str = "-"
    payload: str = "-"

    def render(self) -> str:
        return f"{self.step} {self.participant} {self.action} {self.channel} {self.payload}"

    def to_json(self) -> dict:
        return {"step": self.step, "participant": self.participant, "action": self.action,
                "channel": self.channel, "payload": self.payload}


@dataclass
class Trace:
    events: list = field(default_factory=list)
    stores: dict = field(default_factory=dict)  # final variable store per participant

    def render(self) -> str:
        return "\n".join(e.render() for e in self.events)


# ---------------------------------------------------------------------------
# participants


@dataclass
class _Rec:
    node: PRec
    chans: dict


def _participant(name: str, proc, monitor: bool, store: dict):
    """Generator yielding requests to the scheduler; see ``simulate``."""
    p = proc
    chans: dict = {}
    recs: dict = {}

    def check(f, where, extra=None):
        if not monitor:
            return
        env = {**store, **(extra or {})}
        if not holds(f, env):
            raise MonitorViolation(name, where, f, env)

    while True:
        match p:
            case PInit(svc, parts, cs, body):
                chans = yield ("init", svc, tuple(parts), tuple(cs))
                p = body
            case PJoin(svc, role, cs, body):
                chans = yield ("join", svc, role, tuple(cs))
                p = body
            case PSend(ch, e, var, _, a, body):
                v = evaluate(e, store)
                check(a, f"{ch}!", {var: v})
                yield ("send", chans[ch], serialize_value(v))
                store[var] = v
                p = body
            case PRecv(ch, var, sort, a, body):
                raw = yield ("receive", chans[ch])
                store[var] = deserialize_value(raw, sort)
                check(a, f"{ch}?")
                p = body
            case PSelect(ch, a, bid, label, body):
                check(a, f"{ch}${bid}.{label}")
                yield ("select", chans[ch], serialize_label(bid, label), label)
                p = body
            case PBranch(ch, bid, arms):
                raw = yield ("branch", chans[ch], bid)
                label = deserialize_label(raw, bid, [arm.label for arm in arms])
                arm = next(x for x in arms if x.label == label)
                check(arm.assertion, f"{ch}&{bid}.{label}")
                p = arm.body
            case PIf(cond, then, else_):
                p = then if evaluate(cond, store) else else_
            case PRec(var, args, chan_args, params, chan_params, body, inv):
                values = [evaluate(a, store) for a in args]
                if chan_params:
                    chans = {f: chans[a] for f, a in zip(chan_params, chan_args)}
                recs[var] = _Rec(p, chans)
                store.update({prm.name: v for prm, v in zip(params, values)})
                check(inv, f"mu {var}")
                p = body
            case PCall(var, args, chan_args):
                rec = recs[var]
                values = [evaluate(a, store) for a in args]
                if rec.node.chan_params:
                    chans = {f: chans[a] for f, a in zip(rec.node.chan_params, chan_args)}
                store.update({prm.name: v for prm, v in zip(rec.node.params, values)})
                yield ("recCall", var, ",".join(serialize_value(v) for v in values))
                check(rec.node.invariant, f"{var}(...)")
                p = rec.node.body
            case PInact():
                yield ("end",)
                return
            case _:
                raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# scheduler


def simulate(pf, monitor: bool = True, scheduler: str = "round-robin", seed: Optional[int] = None,
             max_steps: int = 100_000) -> Trace:
    """Run every participant of ``pf`` to completion and return the trace."""
    names = [n for n, _ in pf.participants]
    stores = {n: {} for n in names}
    gens = {n: _participant(n, proc, monitor, stores[n]) for n, proc in pf.participants}
    pending: dict = {}
    for n in names:
        pending[n] = next(gens[n])
    queues: dict = {}
    joined: dict = {}  # participant -> channel map assigned by a matching init
    trace = Trace(stores=stores)
    rng = random.Random(seed) if scheduler == "random" else None
    sessions = 0
    turn = 0

    def ready(n) -> bool:
        req = pending[n]
        match req[0]:
            case "receive" | "branch":
                return bool(queues.get(req[1]))
            case "join":
                return n in joined
            case "init":
                _, svc, parts, _ = req
                return all(any(pending.get(m) and pending[m][0] == "join" and pending[m][1] == svc
                               and pending[m][2] == q and m not in joined for m in pending)
                           for q in parts[1:])
        return True

    def emit(n, action, channel="-", payload="-"):
        trace.events.append(TraceEvent(len(trace.events) + 1, n, action, channel, payload))
        if len(trace.events) > max_steps:
            raise StepLimitExceeded(f"simulation exceeded {max_steps} steps")

    def perform(n):
        nonlocal sessions
        req = pending[n]
        reply = None
        match req[0]:
            case "init":
                _, svc, parts, cs = req
                sessions += 1
                sid = sessions
                reply = {c: (sid, c) for c in cs}
                for q in parts[1:]:
                    m = next(m for m in pending if pending[m] and pending[m][0] == "join"
                             and pending[m][1] == svc and pending[m][2] == q and m not in joined)
                    their = pending[m][3]
                    joined[m] = {mine: (sid, c) for mine, c in zip(their, cs)}
            case "join":
                reply = joined.pop(n)
            case "send":
                _, key, payload = req
                queues.setdefault(key, deque()).append(payload)
                emit(n, "send", key[1], payload)
            case "select":
                _, key, wire, label = req
                queues.setdefault(key, deque()).append(wire)
                emit(n, "select", key[1], label)
            case "receive":
                key = req[1]
                reply = queues[key].popleft()
                emit(n, "receive", key[1], reply)
            case "branch":
                _, key, bid = req
                reply = queues[key].popleft()
                label = reply[len(bid):] if reply.startswith(bid) else reply
                emit(n, "branch", key[1], label)
            case "recCall":
                _, var, args = req
                emit(n, "recCall", "-", f"{var}({args})")
            case "end":
                emit(n, "end")
        try:
            pending[n] = gens[n].send(reply)
        except StopIteration:
            pending[n] = None

    while True:
        live = [n for n in names if pending[n] is not None]
        if not live:
            return trace
        runnable = [n for n in live if ready(n)]
        if not runnable:
            blocked = {}
            for n in live:
                req = pending[n]
                if req[0] in ("receive", "branch"):
                    blocked[n] = f"channel {req[1][1]}"
                else:
                    blocked[n] = f"session {req[1]}"
            raise Deadlock(blocked, trace)
        if rng is not None:
            perform(rng.choice(runnable))
            continue
        # round-robin: next runnable participant after the previous one, in file order
        for k in range(len(names)):
            n = names[(turn + k) % len(names)]
            if n in runnable:
                turn = (turn + k + 1) % len(names)
                perform(n)
                break
