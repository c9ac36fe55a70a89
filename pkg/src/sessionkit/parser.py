"""Recursive-descent parser for global descriptions, processes, local types and formulas.

Grammar summary (``//`` comments run to end of line)::

    file     ::= global (IDENT '::' process)*
    global   ::= IDENT '->' IDENT ':' IDENT '(' IDENT ':' sort ')' assert? (';'|'.') global
               | IDENT '->' IDENT ':' IDENT '&' IDENT '{' garm (',' garm)* '}'
               | 'mu' IDENT '(' exprs ')' '(' params ')' assert? '.' global
               | IDENT '(' exprs ')' | 'end'
    garm     ::= assert? IDENT ':' global
    process  ::= 'init' ':' IDENT '[' IDENT,* ']' '(' IDENT,* ')' '.' process
               | 'join' ':' IDENT '[' IDENT ']' '(' IDENT,* ')' '.' process
               | IDENT '!' '(' expr ')' '(' IDENT ':' sort ')' assert? (';' process)?
               | IDENT '?' '(' IDENT ':' sort ')' assert? (';' process)?
               | IDENT '$' assert? IDENT '.' IDENT (';' process)?
               | IDENT '&' IDENT '{' parm (',' parm)* '}'
               | 'if' expr 'then' process 'else' process
               | 'mu' IDENT '(' exprs (';' IDENT,*)? ')' '(' params (';' IDENT,*)? ')' assert? '.' process
               | IDENT '(' exprs (';' IDENT,*)? ')' | '0' | 'end'
    local    ::= IDENT '!' '<' IDENT ':' sort '>' assert ';' local
               | IDENT '?' '<' IDENT ':' sort '>' assert ';' local
               | IDENT ('+'|'&') IDENT '{' larm (',' larm)* '}'
               | 'mu' IDENT '(' exprs ')' '(' params ')' assert '.' local
               | IDENT '(' exprs ')' | 'end' | 'bot'
    assert   ::= '[' '-' ']' | '[' formula ']'
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from . import sorts
from .diagnostics import SyntaxError_, WellFormednessError
from .model import (
    And, Arm, BinOp, BoolLit, Bottom, Cmp, Exists, Forall, GBranch, GCall, GEnd, GInteraction,
    GRec, Implies, IntLit, LBranch, LCall, LEnd, LRec, LRecv, LSelect, LSend, Neg, Not, Or,
    PBranch, PCall, PIf, PInact, PInit, PJoin, PRec, PRecv, PSelect, PSend, Param, Pos, Sort,
    StrLit, TRUE, Var, global_participants,
)

KEYWORDS = {
    "end", "mu", "init", "join", "if", "then", "else", "exists", "forall",
    "true", "false", "int", "bool", "string", "date",
}
SORTS = {s.value: s for s in Sort}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<sym>->|=>|==|!=|<=|>=|&&|\|\||::|[()\[\]{}<>=!&|,;:.+\-*/$?])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, string, sym, eof
    text: str
    pos: Pos

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return f"'{self.text}'"


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise SyntaxError_(Pos(line, i - line_start + 1), "a token", repr(text[i]))
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, Pos(line, i - line_start + 1)))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = i + chunk.rfind("\n") + 1
        i = m.end()
    tokens.append(Token("eof", "", Pos(line, i - line_start + 1)))
    return tokens


@dataclass
class ProtocolFile:
    """A global description followed by one process per participant."""

    global_: object
    participants: list = field(default_factory=list)  # (name, Process) pairs
    filename: str = "<input>"

    def process_of(self, name: str):
        for n, p in self.participants:
            if n == name:
                return p
        return None


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "ident") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise SyntaxError_(self.tok.pos, f"'{text}'", self.tok.describe())
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise SyntaxError_(t.pos, what, t.describe())
        self.i += 1
        return t.text

    def is_ident(self, k: int = 0) -> bool:
        t = self.peek(k) if k else self.tok
        return t.kind == "ident" and t.text not in KEYWORDS

    def eof(self) -> None:
        if self.tok.kind != "eof":
            raise SyntaxError_(self.tok.pos, "end of input", self.tok.describe())

    def sort(self) -> Sort:
        t = self.tok
        if t.kind == "ident" and t.text in SORTS:
            self.i += 1
            return SORTS[t.text]
        raise SyntaxError_(t.pos, "a sort (int, bool, string, date)", t.describe())

    def ident_list(self, closers=(")",)) -> tuple:
        names = []
        if any(self.at(c) for c in closers):
            return ()
        names.append(self.ident())
        while self.accept(","):
            names.append(self.ident())
        return tuple(names)

    # -- expressions ---------------------------------------------------------

    def assertion(self):
        self.expect("[")
        if self.at("-") and self.peek().text == "]" and self.peek().kind == "sym":
            self.i += 2
            return TRUE
        f = self.expr(quant=True)
        self.expect("]")
        return f

    def maybe_assertion(self):
        return self.assertion() if self.at("[") else TRUE

    def expr(self, quant: bool = False):
        left = self.or_expr(quant)
        if self.accept("=>"):
            return Implies(left, self.expr(quant))
        return left

    def or_expr(self, quant):
        args = [self.and_expr(quant)]
        while self.accept("||"):
            args.append(self.and_expr(quant))
        return args[0] if len(args) == 1 else Or(tuple(args))

    def and_expr(self, quant):
        args = [self.not_expr(quant)]
        while self.accept("&&"):
            args.append(self.not_expr(quant))
        return args[0] if len(args) == 1 else And(tuple(args))

    def not_expr(self, quant):
        if self.accept("!"):
            return Not(self.not_expr(quant))
        if self.at("exists") or self.at("forall"):
            if not quant:
                raise SyntaxError_(self.tok.pos, "an expression (quantifiers are allowed in assertions only)",
                                   self.tok.describe())
            return self.quantified()
        return self.cmp_expr(quant)

    def quantified(self):
        ctor = Exists if self.tok.text == "exists" else Forall
        self.i += 1
        binders = []
        while True:
            name = self.ident("bound variable")
            self.expect(":")
            binders.append((name, self.sort()))
            if not self.accept(","):
                break
        self.expect(".")
        body = self.expr(True)
        for name, s in reversed(binders):
            body = ctor(name, s, body)
        return body

    def cmp_expr(self, quant):
        left = self.add_expr(quant)
        t = self.tok
        if t.kind == "sym" and t.text in ("=", "==", "!=", "<", "<=", ">", ">="):
            self.i += 1
            op = "=" if t.text == "==" else t.text
            return Cmp(op, left, self.add_expr(quant))
        return left

    def add_expr(self, quant):
        left = self.mul_expr(quant)
        while self.tok.kind == "sym" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.mul_expr(quant))
        return left

    def mul_expr(self, quant):
        left = self.unary(quant)
        while self.tok.kind == "sym" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.unary(quant))
        return left

    def unary(self, quant):
        if self.accept("-"):
            if self.tok.kind == "int":
                value = int(self.tok.text)
                self.i += 1
                return IntLit(-value)
            return Neg(self.unary(quant))
        return self.atom(quant)

    def atom(self, quant):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return IntLit(int(t.text))
        if t.kind == "string":
            self.i += 1
            return StrLit(json.loads(t.text))
        if self.accept("true"):
            return BoolLit(True)
        if self.accept("false"):
            return BoolLit(False)
        if self.is_ident():
            self.i += 1
            return Var(t.text)
        if self.accept("("):
            e = self.expr(quant)
            self.expect(")")
            return e
        raise SyntaxError_(t.pos, "an expression", t.describe())

    def expr_list(self, closers=(")",)) -> tuple:
        if any(self.at(c) for c in closers):
            return ()
        out = [self.expr()]
        while self.accept(","):
            out.append(self.expr())
        return tuple(out)

    def params(self, closers=(")",), with_init=False) -> tuple:
        if any(self.at(c) for c in closers):
            return ()
        out = []
        while True:
            name = self.ident("parameter name")
            self.expect(":")
            out.append((name, self.sort()))
            if not self.accept(","):
                break
        return tuple(out)

    # -- global descriptions ---------------------------------------------------

    def global_(self):
        t = self.tok
        pos = t.pos
        if self.accept("end"):
            return GEnd(pos=pos)
        if self.accept("("):
            g = self.global_()
            self.expect(")")
            return g
        if self.accept("mu"):
            var = self.ident("recursion variable")
            self.expect("(")
            inits = self.expr_list((")", ";"))
            if self.accept(";") and self.ident_list():
                raise WellFormednessError("global recursion takes no channel parameters", pos)
            self.expect(")")
            self.expect("(")
            formals = self.params((")", ";"))
            if self.accept(";") and self.ident_list():
                raise WellFormednessError("global recursion takes no channel parameters", pos)
            self.expect(")")
            if len(inits) != len(formals):
                raise WellFormednessError(
                    f"recursion '{var}' has {len(formals)} parameters but {len(inits)} initial values", pos)
            inv = self.maybe_assertion()
            self.expect(".")
            body = self.global_()
            params = tuple(Param(n, s, e) for (n, s), e in zip(formals, inits))
            return GRec(var, params, inv, body, pos=pos)
        if self.is_ident() and self.peek().text == "(" and self.peek().kind == "sym":
            var = self.ident()
            self.expect("(")
            args = self.expr_list()
            self.expect(")")
            return GCall(var, args, pos=pos)
        sender = self.ident("participant or 'end'")
        self.expect("->")
        receiver = self.ident("participant")
        self.expect(":")
        channel = self.ident("channel")
        if self.accept("&"):
            bid = self.ident("branch identifier")
            self.expect("{")
            arms = [self.global_arm()]
            while self.accept(","):
                arms.append(self.global_arm())
            self.expect("}")
            return GBranch(sender, receiver, channel, bid, tuple(arms), pos=pos)
        self.expect("(")
        var = self.ident("payload variable")
        self.expect(":")
        sort = self.sort()
        self.expect(")")
        a = self.maybe_assertion()
        if not (self.accept(";") or self.accept(".")):
            raise SyntaxError_(self.tok.pos, "';'", self.tok.describe())
        cont = self.global_()
        return GInteraction(sender, receiver, channel, var, sort, a, cont, pos=pos)

    def global_arm(self):
        pos = self.tok.pos
        a = self.maybe_assertion()
        label = self.ident("label")
        self.expect(":")
        return Arm(label, a, self.global_(), pos=pos)

    # -- processes ---------------------------------------------------------

    def _process_ends_here(self) -> bool:
        t = self.tok
        if t.kind == "eof" or (t.kind == "sym" and t.text in ("}", ",", ")")) or self.at("else"):
            return True
        return self.is_ident() and self.peek().text == "::"

    def continuation(self):
        if self.accept(";"):
            if self._process_ends_here():
                return PInact(pos=self.tok.pos)
            return self.process()
        return PInact(pos=self.tok.pos)

    def process(self):
        t = self.tok
        pos = t.pos
        if t.kind == "int" and t.text == "0":
            self.i += 1
            return PInact(pos=pos)
        if self.accept("end"):
            return PInact(pos=pos)
        if self.accept("("):
            p = self.process()
            self.expect(")")
            return p
        if self.accept("init"):
            self.expect(":")
            svc = self.ident("service name")
            self.expect("[")
            parts = self.ident_list(("]",))
            if not parts:
                raise SyntaxError_(self.tok.pos, "participant identifier", self.tok.describe())
            self.expect("]")
            self.expect("(")
            chans = self.ident_list()
            self.expect(")")
            self.expect(".")
            return PInit(svc, parts, chans, self.process(), pos=pos)
        if self.accept("join"):
            self.expect(":")
            svc = self.ident("service name")
            self.expect("[")
            part = self.ident("participant identifier")
            self.expect("]")
            self.expect("(")
            chans = self.ident_list()
            self.expect(")")
            self.expect(".")
            return PJoin(svc, part, chans, self.process(), pos=pos)
        if self.accept("if"):
            cond = self.expr()
            self.expect("then")
            then = self.process()
            self.expect("else")
            return PIf(cond, then, self.process(), pos=pos)
        if self.accept("mu"):
            var = self.ident("recursion variable")
            self.expect("(")
            args = self.expr_list((")", ";"))
            chan_args = self.ident_list() if self.accept(";") else ()
            self.expect(")")
            self.expect("(")
            formals = self.params((")", ";"))
            chan_params = self.ident_list() if self.accept(";") else ()
            self.expect(")")
            inv = self.maybe_assertion()
            self.expect(".")
            body = self.process()
            params = tuple(Param(n, s) for n, s in formals)
            return PRec(var, args, chan_args, params, chan_params, body, inv, pos=pos)
        name = self.ident("a process")
        if self.accept("!"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            self.expect("(")
            var = self.ident("payload variable")
            self.expect(":")
            sort = self.sort()
            self.expect(")")
            a = self.maybe_assertion()
            return PSend(name, e, var, sort, a, self.continuation(), pos=pos)
        if self.accept("?"):
            self.expect("(")
            var = self.ident("payload variable")
            self.expect(":")
            sort = self.sort()
            self.expect(")")
            a = self.maybe_assertion()
            return PRecv(name, var, sort, a, self.continuation(), pos=pos)
        if self.accept("$"):
            a = self.maybe_assertion()
            bid = self.ident("branch identifier")
            self.expect(".")
            label = self.ident("label")
            return PSelect(name, a, bid, label, self.continuation(), pos=pos)
        if self.accept("&"):
            bid = self.ident("branch identifier")
            self.expect("{")
            arms = [self.process_arm()]
            while self.accept(","):
                arms.append(self.process_arm())
            self.expect("}")
            return PBranch(name, bid, tuple(arms), pos=pos)
        if self.accept("("):
            args = self.expr_list((")", ";"))
            chan_args = self.ident_list() if self.accept(";") else ()
            self.expect(")")
            return PCall(name, args, chan_args, pos=pos)
        raise SyntaxError_(self.tok.pos, "'!', '?', '$', '&' or '('", self.tok.describe())

    def process_arm(self):
        pos = self.tok.pos
        a = self.maybe_assertion()
        label = self.ident("label")
        self.expect(":")
        return Arm(label, a, self.process(), pos=pos)

    # -- local types -------------------------------------------------------

    def local(self):
        t = self.tok
        if self.accept("end"):
            return LEnd()
        if self.accept("("):
            lt = self.local()
            self.expect(")")
            return lt
        if self.accept("mu"):
            var = self.ident("recursion variable")
            self.expect("(")
            inits = self.expr_list()
            self.expect(")")
            self.expect("(")
            formals = self.params()
            self.expect(")")
            if len(inits) != len(formals):
                raise WellFormednessError(f"recursion '{var}' arity mismatch", t.pos)
            inv = self.maybe_assertion()
            self.expect(".")
            params = tuple(Param(n, s, e) for (n, s), e in zip(formals, inits))
            return LRec(var, params, inv, self.local())
        name = self.ident("a local type")
        if name == "bot" and not self.at("("):
            return Bottom()
        if self.at("!") or self.at("?"):
            ctor = LSend if self.tok.text == "!" else LRecv
            self.i += 1
            self.expect("<")
            var = self.ident("payload variable")
            self.expect(":")
            sort = self.sort()
            self.expect(">")
            a = self.maybe_assertion()
            self.expect(";")
            return ctor(name, var, sort, a, self.local())
        if self.at("+") or self.at("&"):
            ctor = LSelect if self.tok.text == "+" else LBranch
            self.i += 1
            bid = self.ident("branch identifier")
            self.expect("{")
            arms = [self.local_arm()]
            while self.accept(","):
                arms.append(self.local_arm())
            self.expect("}")
            return ctor(name, bid, tuple(arms))
        if self.accept("("):
            args = self.expr_list()
            self.expect(")")
            return LCall(name, args)
        raise SyntaxError_(self.tok.pos, "'!', '?', '+', '&' or '('", self.tok.describe())

    def local_arm(self):
        a = self.maybe_assertion()
        label = self.ident("label")
        self.expect(":")
        return Arm(label, a, self.local())

    # -- files -------------------------------------------------------------

    def protocol_file(self, filename: str) -> ProtocolFile:
        g = self.global_()
        parts = []
        while self.tok.kind != "eof":
            pos = self.tok.pos
            name = self.ident("participant name")
            self.expect("::")
            parts.append((name, self.process(), pos))
        return g, parts


def parse_formula(text: str):
    """Parse an assertion formula; the placeholder ``-`` (or ``[-]``) means ``true``."""
    stripped = text.strip()
    if stripped in ("-", "[-]"):
        return TRUE
    p = Parser(text)
    if p.at("["):
        f = p.assertion()
    else:
        f = p.expr(quant=True)
    p.eof()
    sorts.check_formula_shape(f, p.toks[0].pos)
    return f


def parse_expr(text: str):
    p = Parser(text)
    e = p.expr()
    p.eof()
    return e


def parse_global(text: str):
    p = Parser(text)
    g = p.global_()
    p.eof()
    sorts.check_global(g)
    return g


def parse_process(text: str):
    p = Parser(text)
    proc = p.process()
    p.eof()
    sorts.check_process(proc)
    return proc


def parse_local(text: str):
    p = Parser(text)
    t = p.local()
    p.eof()
    return t


def parse_protocol_file(text: str, filename: str = "<input>") -> ProtocolFile:
    p = Parser(text)
    g, parts = p.protocol_file(filename)
    sorts.check_global(g)
    names_in_global = set(global_participants(g))
    seen = set()
    inits = []
    for name, proc, pos in parts:
        if name in seen:
            raise WellFormednessError(f"participant '{name}' is implemented twice", pos)
        seen.add(name)
        sorts.check_process(proc)
        if names_in_global and name not in names_in_global:
            raise WellFormednessError(f"participant '{name}' does not occur in the global description", pos)
        role = _session_role(proc)
        if role is not None and role[1] != name:
            raise WellFormednessError(
                f"process for '{name}' opens its session as '{role[1]}'", role[2])
        for node in _session_openers(proc):
            if isinstance(node, PInit):
                inits.append(node)
                unknown = [q for q in node.participants if names_in_global and q not in names_in_global]
                if unknown:
                    raise WellFormednessError(
                        f"session participant '{unknown[0]}' does not occur in the global description", node.pos)
    if parts:
        services = {}
        for node in inits:
            if node.service in services:
                raise WellFormednessError(f"service '{node.service}' is initiated more than once", node.pos)
            services[node.service] = node
        if not inits:
            raise WellFormednessError("no participant initiates the session (missing init)", parts[0][2])
    return ProtocolFile(g, [(n, proc) for n, proc, _ in parts], filename)


def _session_role(proc) -> Optional[tuple]:
    if isinstance(proc, PInit):
        return proc.service, proc.participants[0], proc.pos
    if isinstance(proc, PJoin):
        return proc.service, proc.participant, proc.pos
    return None


def _session_openers(proc):
    stack = [proc]
    while stack:
        node = stack.pop()
        match node:
            case PInit() | PJoin():
                yield node
                stack.append(node.body)
            case PSend() | PRecv() | PSelect() | PRec():
                stack.append(node.body)
            case PBranch():
                stack.extend(a.body for a in node.arms)
            case PIf():
                stack.extend([node.then, node.else_])
