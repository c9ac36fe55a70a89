"""Session type inference for participant processes and comparison with projections.

Inference is one depth-first pass parameterized by a :class:`TypingMode`,
which supplies the compatibility test and the composition of environments.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import presburger
from .diagnostics import (
    ArityMismatch, BranchMismatch, ChannelNotInScope, CheckReport, SortMismatchError,
    SourceError, TypingError, TypingRecInvariant, TypingSendUnsat, UnknownBranchGroup,
)
from .model import (
    Arm, Bottom, LBranch, LCall, LEnd, LRec, LRecv, LSelect, LSend, PBranch, PCall, PIf,
    PInact, PInit, PJoin, Param, PRec, PRecv, PSelect, PSend, TRUE, Var, conj,
    strip_assertions_local, substitute,
)
from .printer import show_formula, show_local
from .sorts import check_expr, compatible


@dataclass(frozen=True)
class SessionKey:
    service: str
    channels: tuple
    participant: str

    @property
    def session(self) -> tuple:
        return (self.service, self.channels)

    def heading(self) -> str:
        return f"{self.service}({','.join(self.channels)})"


@dataclass
class TypingEnvironment:
    entries: dict = field(default_factory=dict)  # SessionKey -> local assertion
    declared: dict = field(default_factory=dict)  # (service, channels) -> participants

    def closed(self, session) -> bool:
        wanted = set(self.declared.get(session, ()))
        have = {k.participant for k in self.entries if k.session == session}
        return bool(wanted) and (wanted <= have or "*" in have)

    def copy(self) -> "TypingEnvironment":
        return TypingEnvironment(dict(self.entries), dict(self.declared))


@dataclass(frozen=True)
class TypingMode:
    name: str
    compatible: Callable[[TypingEnvironment, TypingEnvironment], bool]
    compose: Callable[[TypingEnvironment, TypingEnvironment], TypingEnvironment]


def _merge_declared(a: TypingEnvironment, b: TypingEnvironment) -> dict:
    out = dict(a.declared)
    out.update(b.declared)
    return out


def _multiparty_compatible(a: TypingEnvironment, b: TypingEnvironment) -> bool:
    return not set(a.entries) & set(b.entries)


def _multiparty_compose(a: TypingEnvironment, b: TypingEnvironment) -> TypingEnvironment:
    if not _multiparty_compatible(a, b):
        raise ValueError("environments are not compatible")
    entries = dict(a.entries)
    entries.update(b.entries)
    return TypingEnvironment(entries, _merge_declared(a, b))


def _binary_compatible(a: TypingEnvironment, b: TypingEnvironment) -> bool:
    for ka, ta in a.entries.items():
        for kb, tb in b.entries.items():
            if ka.session != kb.session:
                continue
            if ka.participant == kb.participant or isinstance(ta, Bottom) or isinstance(tb, Bottom):
                return False
            if not shapes_dual(ta, tb):
                return False
    return True


def _binary_compose(a: TypingEnvironment, b: TypingEnvironment) -> TypingEnvironment:
    if not _binary_compatible(a, b):
        raise ValueError("environments are not compatible")
    entries = {}
    shared = {ka.session for ka in a.entries} & {kb.session for kb in b.entries}
    for env in (a, b):
        for k, t in env.entries.items():
            if k.session in shared:
                entries[SessionKey(k.service, k.channels, "*")] = Bottom()
            else:
                entries[k] = t
    return TypingEnvironment(entries, _merge_declared(a, b))


MULTIPARTY = TypingMode("multiparty", _multiparty_compatible, _multiparty_compose)
BINARY = TypingMode("binary", _binary_compatible, _binary_compose)
MODES = {"multiparty": MULTIPARTY, "binary": BINARY}


# ---------------------------------------------------------------------------
# duality


def dual(t):
    """Swap sends with receives and selections with branches, keeping assertions."""
    match t:
        case LSend(ch, v, s, a, cont):
            return LRecv(ch, v, s, a, dual(cont))
        case LRecv(ch, v, s, a, cont):
            return LSend(ch, v, s, a, dual(cont))
        case LSelect(ch, bid, arms):
            return LBranch(ch, bid, tuple(Arm(x.label, x.assertion, dual(x.body)) for x in arms))
        case LBranch(ch, bid, arms):
            return LSelect(ch, bid, tuple(Arm(x.label, x.assertion, dual(x.body)) for x in arms))
        case LRec(var, params, inv, body):
            return LRec(var, params, inv, dual(body))
    return t


def _shape(t, recs=()):
    """Structure of a local assertion without names, assertions or initial values."""
    match t:
        case LSend(ch, _, s, _, cont):
            return ("!", ch, s, _shape(cont, recs))
        case LRecv(ch, _, s, _, cont):
            return ("?", ch, s, _shape(cont, recs))
        case LSelect(ch, bid, arms):
            return ("+", ch, bid, tuple(sorted((a.label, _shape(a.body, recs)) for a in arms)))
        case LBranch(ch, bid, arms):
            return ("&", ch, bid, tuple(sorted((a.label, _shape(a.body, recs)) for a in arms)))
        case LRec(var, params, _, body):
            return ("mu", tuple(p.sort for p in params), _shape(body, (var,) + recs))
        case LCall(var, args):
            return ("call", recs.index(var) if var in recs else var, len(args))
        case LEnd():
            return ("end",)
        case Bottom():
            return ("bot",)
    raise TypeError(f"not a local assertion: {t!r}")


def shapes_dual(a, b) -> bool:
    return _shape(dual(strip_assertions_local(a))) == _shape(strip_assertions_local(b))


# ---------------------------------------------------------------------------
# branch groups


@dataclass
class BranchGroupTable:
    groups: dict = field(default_factory=dict)  # branch id -> (channel, [(label, assertion)])

    def add(self, bid: str, channel: str, arms) -> None:
        if bid in self.groups:
            ch, labels = self.groups[bid]
            have = {lbl for lbl, _ in labels}
            labels.extend((a.label, a.assertion) for a in arms if a.label not in have)
        else:
            self.groups[bid] = (channel, [(a.label, a.assertion) for a in arms])

    def resolve(self, bid: str, channel: str, label: str, pos=None) -> None:
        if bid not in self.groups:
            raise UnknownBranchGroup(bid, pos)
        ch, labels = self.groups[bid]
        if ch != channel:
            raise UnknownBranchGroup(bid, pos, f"group is offered on channel {ch}, not {channel}")
        if label not in {lbl for lbl, _ in labels}:
            raise UnknownBranchGroup(bid, pos, f"no label '{label}' in the group")

    @staticmethod
    def collect(processes) -> "BranchGroupTable":
        table = BranchGroupTable()
        for proc in processes:
            _collect_groups(proc, {}, table)
        return table


def _collect_groups(p, chans: dict, table: BranchGroupTable) -> None:
    match p:
        case PInit(_, _, cs, body) | PJoin(_, _, cs, body):
            _collect_groups(body, {c: c for c in cs}, table)
        case PSend() | PRecv() | PSelect():
            _collect_groups(p.body, chans, table)
        case PBranch(ch, bid, arms):
            table.add(bid, chans.get(ch, ch), arms)
            for a in arms:
                _collect_groups(a.body, chans, table)
        case PIf(_, then, else_):
            _collect_groups(then, chans, table)
            _collect_groups(else_, chans, table)
        case PRec(_, _, chan_args, _, chan_params, body, _):
            inner = dict(chans) if not chan_params else {
                f: chans.get(a, a) for f, a in zip(chan_params, chan_args)}
            _collect_groups(body, inner, table)


# ---------------------------------------------------------------------------
# inference


@dataclass(frozen=True)
class _Ctx:
    chans: dict          # process channel name -> session channel
    facts: object        # conjunction of prior process assertions
    env: dict            # variable -> sort
    recs: dict           # recursion variable -> (params, chan_params, invariant, channel map)


def infer_type(p, mode: TypingMode = MULTIPARTY, groups: Optional[BranchGroupTable] = None) -> TypingEnvironment:
    """Type every session opened by ``p``."""
    env = TypingEnvironment()
    _infer_sessions(p, env, groups)
    return env


def _infer_sessions(p, env: TypingEnvironment, groups) -> None:
    match p:
        case PInit(svc, parts, chans, body) | PJoin(svc, parts, chans, body):
            me = parts[0] if isinstance(p, PInit) else parts
            if isinstance(p, PInit):
                env.declared[(svc, tuple(chans))] = tuple(parts)
            ctx = _Ctx({c: c for c in chans}, TRUE, {}, {})
            env.entries[SessionKey(svc, tuple(chans), me)] = _infer(body, ctx, groups)
        case PInact():
            pass
        case _:
            raise TypingError("a participant process must start with init or join", getattr(p, "pos", None))


def _channel(ctx: _Ctx, ch: str, pos):
    if ch not in ctx.chans:
        raise ChannelNotInScope(ch, pos)
    return ctx.chans[ch]


def _spaced(f) -> str:
    return show_formula(f, spaced=True)


def _infer(p, ctx: _Ctx, groups):
    match p:
        case PInact():
            return LEnd()
        case PInit() | PJoin():
            raise TypingError("nested session initiation is not supported", p.pos)
        case PSend(ch, e, var, sort, a, body):
            k = _channel(ctx, ch, p.pos)
            inst = substitute(a, {var: e}) if sort.assertable else a
            if not presburger.implies(ctx.facts, inst):
                raise TypingSendUnsat(_spaced(ctx.facts), _spaced(inst), p.pos)
            inner = _Ctx(ctx.chans, conj(ctx.facts, a), {**ctx.env, var: sort}, ctx.recs)
            return LSend(k, var, sort, a, _infer(body, inner, groups))
        case PRecv(ch, var, sort, a, body):
            k = _channel(ctx, ch, p.pos)
            inner = _Ctx(ctx.chans, conj(ctx.facts, a), {**ctx.env, var: sort}, ctx.recs)
            return LRecv(k, var, sort, a, _infer(body, inner, groups))
        case PSelect(ch, a, bid, label, body):
            k = _channel(ctx, ch, p.pos)
            if groups is not None:
                groups.resolve(bid, k, label, p.pos)
            return LSelect(k, bid, (Arm(label, a, _infer(body, ctx, groups)),))
        case PBranch(ch, bid, arms):
            k = _channel(ctx, ch, p.pos)
            out = []
            for arm in arms:
                inner = _Ctx(ctx.chans, conj(ctx.facts, arm.assertion), ctx.env, ctx.recs)
                out.append(Arm(arm.label, arm.assertion, _infer(arm.body, inner, groups)))
            return LBranch(k, bid, tuple(out))
        case PIf(_, then, else_):
            return _merge(_infer(then, ctx, groups), _infer(else_, ctx, groups), p.pos)
        case PRec(var, args, chan_args, params, chan_params, body, inv):
            _check_actuals(var, args, params, ctx, p.pos)
            if len(chan_args) != len(chan_params):
                raise ArityMismatch(
                    f"recursion '{var}' declares {len(chan_params)} channel parameters "
                    f"but receives {len(chan_args)}", p.pos)
            if chan_params:
                inner_chans = {f: _channel(ctx, a, p.pos) for f, a in zip(chan_params, chan_args)}
            else:
                inner_chans = dict(ctx.chans)
            entry = substitute(inv, {prm.name: a for prm, a in zip(params, args)})
            if not presburger.implies(ctx.facts, entry):
                raise TypingRecInvariant(_spaced(ctx.facts), _spaced(entry), p.pos)
            recs = {**ctx.recs, var: (params, chan_params, inv, inner_chans)}
            env = {**ctx.env, **{prm.name: prm.sort for prm in params}}
            inner = _Ctx(inner_chans, conj(ctx.facts, inv), env, recs)
            lparams = tuple(Param(prm.name, prm.sort, a) for prm, a in zip(params, args))
            return LRec(var, lparams, inv, _infer(body, inner, groups))
        case PCall(var, args, chan_args):
            params, chan_params, inv, def_chans = ctx.recs[var]
            _check_actuals(var, args, params, ctx, p.pos)
            if len(chan_args) != len(chan_params):
                raise ArityMismatch(
                    f"call of '{var}' passes {len(chan_args)} channels, expected {len(chan_params)}", p.pos)
            for f, a in zip(chan_params, chan_args):
                if _channel(ctx, a, p.pos) != def_chans[f]:
                    raise TypingError(
                        f"call of '{var}' passes channel {a} where {def_chans[f]} is expected", p.pos)
            goal = substitute(inv, {prm.name: a for prm, a in zip(params, args)})
            if not presburger.implies(ctx.facts, goal):
                raise TypingRecInvariant(_spaced(ctx.facts), _spaced(goal), p.pos)
            return LCall(var, tuple(args))
    raise TypeError(f"not a process: {p!r}")


def _check_actuals(var, args, params, ctx: _Ctx, pos) -> None:
    if len(args) != len(params):
        raise ArityMismatch(f"'{var}' expects {len(params)} values but receives {len(args)}", pos)
    for a, prm in zip(args, params):
        found = check_expr(a, ctx.env, pos)
        if not compatible(found, prm.sort):
            raise SortMismatchError(
                f"argument for '{prm.name}' of '{var}' has sort {found}, declared {prm.sort}", pos)


def _merge(a, b, pos):
    """Reconcile the types of the two arms of a conditional."""
    if a == b:
        return a
    match a, b:
        case (LSelect(ch1, bid1, arms1), LSelect(ch2, bid2, arms2)) if (ch1, bid1) == (ch2, bid2):
            merged = list(arms1)
            for arm in arms2:
                same = [i for i, x in enumerate(merged) if x.label == arm.label]
                if not same:
                    merged.append(arm)
                    continue
                old = merged[same[0]]
                if old.assertion != arm.assertion:
                    raise BranchMismatch(f"label '{arm.label}' is selected under different assertions", pos)
                merged[same[0]] = Arm(old.label, old.assertion, _merge(old.body, arm.body, pos))
            return LSelect(ch1, bid1, tuple(merged))
        case (LSend(), LSend()) | (LRecv(), LRecv()) if a.channel == b.channel and a.var == b.var \
                and a.sort == b.sort and a.assertion == b.assertion:
            return type(a)(a.channel, a.var, a.sort, a.assertion, _merge(a.cont, b.cont, pos))
        case (LBranch(ch1, bid1, arms1), LBranch(ch2, bid2, arms2)) if (ch1, bid1) == (ch2, bid2) \
                and [x.label for x in arms1] == [x.label for x in arms2] \
                and all(x.assertion == y.assertion for x, y in zip(arms1, arms2)):
            return LBranch(ch1, bid1, tuple(Arm(x.label, x.assertion, _merge(x.body, y.body, pos))
                                            for x, y in zip(arms1, arms2)))
        case (LRec(), LRec()) if (a.var, a.params, a.invariant) == (b.var, b.params, b.invariant):
            return LRec(a.var, a.params, a.invariant, _merge(a.body, b.body, pos))
    raise BranchMismatch(
        f"the branches of a conditional have different session types: {show_local(a)} vs {show_local(b)}", pos)


# ---------------------------------------------------------------------------
# refinement


@dataclass(frozen=True)
class Mismatch:
    path: str
    inferred: object
    projected: object
    reason: str


def refines(inferred, projected) -> Optional[Mismatch]:
    """None when ``inferred`` refines ``projected``, else the first point of disagreement.

    Sends and selections may strengthen assertions, receptions and branchings
    may weaken them, a selection may offer fewer labels, payload and
    recursion names are matched up to renaming.
    """
    return _refine(inferred, projected, {}, {}, ())


def _rename(f, ren: dict):
    return substitute(f, {k: Var(v) for k, v in ren.items() if k != v}) if ren else f


def _refine(i, p, ren: dict, recs: dict, path: tuple) -> Optional[Mismatch]:
    def fail(reason):
        return Mismatch(" / ".join(path) or "root", i, p, reason)

    match i, p:
        case (LEnd(), LEnd()) | (Bottom(), Bottom()):
            return None
        case (LSend(), LSend()) | (LRecv(), LRecv()):
            step = f"{i.channel}{'!' if isinstance(i, LSend) else '?'}"
            if i.channel != p.channel:
                return fail(f"channel {i.channel} where {p.channel} is expected")
            if i.sort != p.sort:
                return fail(f"payload sort {i.sort} where {p.sort} is expected")
            ren = {**ren, i.var: p.var}
            mine = _rename(i.assertion, ren)
            ok = presburger.implies(mine, p.assertion) if isinstance(i, LSend) \
                else presburger.implies(p.assertion, mine)
            if not ok:
                return fail("assertion is not a refinement")
            return _refine(i.cont, p.cont, ren, recs, path + (step,))
        case (LSelect(), LSelect()) | (LBranch(), LBranch()):
            if i.channel != p.channel:
                return fail(f"channel {i.channel} where {p.channel} is expected")
            theirs = {a.label: a for a in p.arms}
            mine = {a.label: a for a in i.arms}
            if isinstance(i, LSelect):
                extra = [lbl for lbl in mine if lbl not in theirs]
                if extra:
                    return fail(f"selects unknown label '{extra[0]}'")
            elif set(mine) != set(theirs):
                return fail("offers labels " + ",".join(sorted(mine)) + " instead of " + ",".join(sorted(theirs)))
            for label, arm in mine.items():
                other = theirs[label]
                a = _rename(arm.assertion, ren)
                ok = presburger.implies(a, other.assertion) if isinstance(i, LSelect) \
                    else presburger.implies(other.assertion, a)
                if not ok:
                    return fail(f"assertion of label '{label}' is not a refinement")
                bad = _refine(arm.body, other.body, ren, recs, path + (f"{i.channel}.{label}",))
                if bad:
                    return bad
            return None
        case (LRec(), LRec()):
            if [x.sort for x in i.params] != [x.sort for x in p.params]:
                return fail("recursion parameters differ")
            ren = {**ren, **{x.name: y.name for x, y in zip(i.params, p.params)}}
            if i.invariant != TRUE and not presburger.implies(_rename(i.invariant, ren), p.invariant):
                return fail("recursion invariant is not a refinement")
            return _refine(i.body, p.body, ren, {**recs, i.var: p.var}, path + (f"mu {p.var}",))
        case (LCall(), LCall()):
            if recs.get(i.var, i.var) != p.var or len(i.args) != len(p.args):
                return fail("recursive call differs")
            return None
    return fail("different session structure")


def mismatch_block(participant: str, inferred, projected) -> str:
    return (f"Local type doesn't match projection for {participant}!\n"
            f"Type:       {show_local(inferred)}\n"
            f"Projection: {show_local(projected)}")


# ---------------------------------------------------------------------------
# whole files


@dataclass
class FileTyping:
    types: list = field(default_factory=list)     # (participant, SessionKey, local assertion)
    errors: list = field(default_factory=list)    # (participant, SourceError)
    environment: TypingEnvironment = field(default_factory=TypingEnvironment)
    report: CheckReport = field(default_factory=CheckReport)


def infer_all(pf, mode: TypingMode = MULTIPARTY) -> FileTyping:
    """Infer every participant's type and compose the environments."""
    out = FileTyping()
    groups = BranchGroupTable.collect(proc for _, proc in pf.participants)
    acc = TypingEnvironment()
    for name, proc in pf.participants:
        try:
            env = infer_type(proc, mode, groups)
        except SourceError as err:
            out.errors.append((name, err))
            kind = getattr(err, "kind", "Typing")
            out.report.add(kind, name, err.message, err.line, **({"col": err.pos.col} if err.pos else {}))
            continue
        for key, t in env.entries.items():
            out.types.append((name, key, t))
        if not mode.compatible(acc, env):
            out.report.add("Compatibility", name,
                           f"the environment of {name} is not compatible with the others ({mode.name} mode)")
            continue
        acc = mode.compose(acc, env)
    out.environment = acc
    return out


def validate_all(pf, projections, mode: TypingMode = MULTIPARTY,
                 typing: Optional[FileTyping] = None) -> CheckReport:
    """Type the participants and compare each inferred type with its projection."""
    typing = typing or infer_all(pf, mode)
    report = CheckReport()
    report.extend(typing.report)
    projected = dict(projections)
    implemented = {name for name, _ in pf.participants}
    failed = {name for name, _ in typing.errors}
    for name in projected:
        if pf.participants and name not in implemented:
            report.add("MissingParticipant", name, f"no process implements participant {name}")
    for session, parts in typing.environment.declared.items():
        missing = [q for q in parts if q not in implemented]
        if missing:
            report.add("OpenSession", f"{session[0]}", f"session {session[0]} has no process for "
                       + ", ".join(missing))
    for name, key, t in typing.types:
        if name in failed or name not in projected:
            continue
        bad = refines(t, projected[name])
        if bad is not None:
            report.add("Mismatch", name, mismatch_block(name, t, projected[name]), None,
                       participant=name, at=bad.path, reason=bad.reason,
                       inferredSlice=show_local(bad.inferred), projectedSlice=show_local(bad.projected),
                       type=show_local(t), projection=show_local(projected[name]))
    return report
