"""Textual rendering of formulas, global/local assertions and processes.

Two formula styles exist. The compact style (``0<c && c<=q``) is used inside
types and source files; the spaced style (``0 > 50``) is used in diagnostics.
Both re-parse to the same tree.
"""
from __future__ import annotations

import json

from .model import (
    And, BinOp, BoolLit, Bottom, Cmp, Divides, Exists, Forall, GBranch, GCall, GEnd,
    GInteraction, GRec, Implies, IntLit, LBranch, LCall, LEnd, LRec, LRecv, LSelect, LSend,
    Neg, Not, Or, PBranch, PCall, PIf, PInact, PInit, PJoin, PRec, PRecv, PSelect, PSend,
    StrLit, TRUE, Var,
)

# binding strength, higher binds tighter
_QUANT, _IMPL, _OR, _AND, _NOT, _CMP, _ADD, _MUL, _NEG, _ATOM = range(10)


def show_expr(e, spaced: bool = False) -> str:
    return _show(e, 0, spaced)


def show_formula(f, spaced: bool = False) -> str:
    return _show(f, 0, spaced)


def _prec(e) -> int:
    match e:
        case Exists() | Forall():
            return _QUANT
        case Implies():
            return _IMPL
        case Or():
            return _OR
        case And():
            return _AND
        case Not():
            return _NOT
        case Cmp() | Divides():
            return _CMP
        case BinOp(op, _, _):
            return _ADD if op in "+-" else _MUL
        case Neg():
            return _NEG
    return _ATOM


def _show(e, need: int, sp: bool) -> str:
    text = _raw(e, sp)
    return f"({text})" if _prec(e) < need else text


def _raw(e, sp: bool) -> str:
    match e:
        case IntLit(v):
            return str(v)
        case BoolLit(v):
            return "true" if v else "false"
        case StrLit(v):
            return json.dumps(v, ensure_ascii=False)
        case Var(name):
            return name
        case Neg(x):
            # a bare literal would re-parse as a negative literal
            inner = f"({_raw(x, sp)})" if isinstance(x, IntLit) else _show(x, _NEG, sp)
            return "-" + inner
        case BinOp(op, l, r):
            lvl = _ADD if op in "+-" else _MUL
            sep = f" {op} " if sp else op
            return _show(l, lvl, sp) + sep + _show(r, lvl + 1, sp)
        case Cmp(op, l, r):
            sep = f" {op} " if sp else op
            return _show(l, _ADD, sp) + sep + _show(r, _ADD, sp)
        case Divides(k, x):
            sep = " | " if sp else "|"
            return f"{k}{sep}{_show(x, _ADD, sp)}"
        case Not(x):
            return "!" + _show(x, _NOT, sp)
        case And(args):
            return " && ".join(_show(a, _NOT, sp) for a in args)
        case Or(args):
            return " || ".join(_show(a, _AND, sp) for a in args)
        case Implies(l, r):
            return _show(l, _OR, sp) + " => " + _show(r, _IMPL, sp)
        case Exists(v, sort, body):
            return f"exists {v}:{sort}. {_show(body, _QUANT, sp)}"
        case Forall(v, sort, body):
            return f"forall {v}:{sort}. {_show(body, _QUANT, sp)}"
    raise TypeError(f"cannot print {e!r}")


def _assert(f) -> str:
    return f"[{show_formula(f)}]"


def _exprs(es) -> str:
    return ",".join(show_expr(e) for e in es)


def _params(ps) -> str:
    return ",".join(f"{p.name}:{p.sort}" for p in ps)


# ---------------------------------------------------------------------------
# global assertions


def show_global(g, indent: int = 0) -> str:
    pad = "  " * indent
    match g:
        case GInteraction(s, r, ch, v, sort, a, cont):
            return f"{pad}{s} -> {r} : {ch}({v}:{sort}){_assert(a)};\n" + show_global(cont, indent)
        case GBranch(s, r, ch, bid, arms):
            lines = [f"{pad}{s} -> {r} : {ch}&{bid}{{"]
            for i, arm in enumerate(arms):
                body = show_global(arm.body, indent + 2).lstrip()
                sep = "," if i < len(arms) - 1 else ""
                lines.append(f"{pad}  {_assert(arm.assertion)} {arm.label}: {body}{sep}")
            lines.append(f"{pad}}}")
            return "\n".join(lines)
        case GRec(t, params, inv, body):
            inits = _exprs(p.init for p in params)
            return f"{pad}mu {t}({inits})({_params(params)}){_assert(inv)}.\n" + show_global(body, indent)
        case GCall(t, args):
            return f"{pad}{t}({_exprs(args)})"
        case GEnd():
            return f"{pad}end"
    raise TypeError(f"not a global assertion: {g!r}")


# ---------------------------------------------------------------------------
# local assertions


def show_local(t) -> str:
    match t:
        case LSend(ch, v, sort, a, cont):
            return f"{ch}!<{v}:{sort}>{_assert(a)};" + show_local(cont)
        case LRecv(ch, v, sort, a, cont):
            return f"{ch}?<{v}:{sort}>{_assert(a)};" + show_local(cont)
        case LSelect(ch, bid, arms):
            return f"{ch}+{bid}{{" + _local_arms(arms) + "}"
        case LBranch(ch, bid, arms):
            return f"{ch}&{bid}{{" + _local_arms(arms) + "}"
        case LRec(var, params, inv, body):
            inits = _exprs(p.init for p in params)
            return f"mu {var}({inits})({_params(params)}){_assert(inv)}." + show_local(body)
        case LCall(var, args):
            return f"{var}({_exprs(args)})"
        case LEnd():
            return "end"
        case Bottom():
            return "bot"
    raise TypeError(f"not a local assertion: {t!r}")


def _local_arms(arms) -> str:
    return ", ".join(f"{_assert(a.assertion)} {a.label}: {show_local(a.body)}" for a in arms)


# ---------------------------------------------------------------------------
# processes


def show_process(p, indent: int = 0) -> str:
    pad = "  " * indent
    match p:
        case PInit(svc, parts, chans, body):
            head = f"{pad}init:{svc}[{','.join(parts)}]({','.join(chans)})."
            return head + "\n" + show_process(body, indent)
        case PJoin(svc, part, chans, body):
            head = f"{pad}join:{svc}[{part}]({','.join(chans)})."
            return head + "\n" + show_process(body, indent)
        case PSend(ch, e, v, sort, a, body):
            return f"{pad}{ch}!({show_expr(e)})({v}:{sort}){_assert(a)};\n" + show_process(body, indent)
        case PRecv(ch, v, sort, a, body):
            return f"{pad}{ch}?({v}:{sort}){_assert(a)};\n" + show_process(body, indent)
        case PSelect(ch, a, bid, label, body):
            return f"{pad}{ch}$ {_assert(a)} {bid}.{label};\n" + show_process(body, indent)
        case PBranch(ch, bid, arms):
            lines = [f"{pad}{ch}&{bid}{{"]
            for i, arm in enumerate(arms):
                body = show_process(arm.body, indent + 2).lstrip()
                sep = "," if i < len(arms) - 1 else ""
                lines.append(f"{pad}  {_assert(arm.assertion)} {arm.label}: {body}{sep}")
            lines.append(f"{pad}}}")
            return "\n".join(lines)
        case PIf(cond, then, else_):
            return (f"{pad}if {show_expr(cond)} then\n" + show_process(then, indent + 1)
                    + f"\n{pad}else\n" + show_process(else_, indent + 1))
        case PRec(var, args, chan_args, params, chan_params, body, inv):
            a = _exprs(args) + (";" + ",".join(chan_args) if chan_args or chan_params else "")
            f = _params(params) + (";" + ",".join(chan_params) if chan_args or chan_params else "")
            inv_text = "" if inv == TRUE else _assert(inv)
            return f"{pad}mu {var}({a})({f}){inv_text}.\n" + show_process(body, indent)
        case PCall(var, args, chan_args):
            a = _exprs(args) + (";" + ",".join(chan_args) if chan_args else "")
            return f"{pad}{var}({a})"
        case PInact():
            return f"{pad}0"
    raise TypeError(f"not a process: {p!r}")


def show_protocol(pf) -> str:
    parts = [show_global(pf.global_)]
    for name, proc in pf.participants:
        parts.append(f"{name} ::\n{show_process(proc, 1)}")
    return "\n\n".join(parts) + "\n"
