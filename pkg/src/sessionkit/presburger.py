"""Decision procedure for linear integer arithmetic with boolean variables.

Quantifiers are removed with Cooper's method. Formulas are first translated
to an internal form whose atoms are normalized linear constraints::

    t <= 0    t = 0    t != 0    k | t    not k | t

Boolean variables become integers restricted to {0, 1}, with ``b`` read as
``b = 1``. Division by a positive constant ``e / k`` is replaced by a fresh
``d`` with ``k*d <= e <= k*d + k - 1`` (floor division).

Only four operations are public: :func:`eliminate_quantifiers`,
:func:`is_satisfiable`, :func:`is_valid` and :func:`implies`.
"""
from __future__ import annotations

import itertools
import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .diagnostics import NonLinearAtom, ResourceExhausted
from .model import (
    And, BinOp, BoolLit, Cmp, Divides, Exists, Forall, Implies, IntLit, Neg, Not, Or, Sort,
    StrLit, Var, conj as expr_conj, disj as expr_disj, free_variables,
)

DEFAULT_BUDGET = 2_000_000

_budget: ContextVar[Optional[list]] = ContextVar("presburger_budget", default=None)


@contextmanager
def qe_budget(steps: int):
    """Limit the work of every query issued inside the block to ``steps`` atom operations."""
    token = _budget.set([steps, steps])
    try:
        yield
    finally:
        _budget.reset(token)


def _tick(n: int = 1) -> None:
    b = _budget.get()
    if b is None:
        return
    b[0] -= n
    if b[0] < 0:
        raise ResourceExhausted(f"quantifier elimination exceeded its budget of {b[1]} steps")


@contextmanager
def _query():
    # a fresh counter per top-level query; the configured size is inherited
    outer = _budget.get()
    size = outer[1] if outer is not None else DEFAULT_BUDGET
    token = _budget.set([size, size])
    try:
        yield
    finally:
        _budget.reset(token)


# ---------------------------------------------------------------------------
# linear terms


@dataclass(frozen=True)
class Lin:
    coeffs: tuple  # sorted (var, nonzero coefficient) pairs
    const: int

    @staticmethod
    def make(d: dict, const: int) -> "Lin":
        return Lin(tuple(sorted((v, c) for v, c in d.items() if c)), const)

    @staticmethod
    def var(name: str) -> "Lin":
        return Lin(((name, 1),), 0)

    @staticmethod
    def num(k: int) -> "Lin":
        return Lin((), k)

    def coef(self, x: str) -> int:
        for v, c in self.coeffs:
            if v == x:
                return c
        return 0

    @property
    def vars(self):
        return {v for v, _ in self.coeffs}

    def __add__(self, other: "Lin") -> "Lin":
        d = dict(self.coeffs)
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return Lin.make(d, self.const + other.const)

    def scale(self, k: int) -> "Lin":
        if k == 0:
            return Lin((), 0)
        return Lin(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def __neg__(self) -> "Lin":
        return self.scale(-1)

    def __sub__(self, other: "Lin") -> "Lin":
        return self + (-other)

    def shift(self, k: int) -> "Lin":
        return Lin(self.coeffs, self.const + k)

    def subst(self, x: str, t: "Lin") -> "Lin":
        c = self.coef(x)
        if c == 0:
            return self
        rest = Lin(tuple(p for p in self.coeffs if p[0] != x), self.const)
        return rest + t.scale(c)

    def set_coef(self, x: str, c: int) -> "Lin":
        d = dict(self.coeffs)
        d[x] = c
        return Lin.make(d, self.const)


# ---------------------------------------------------------------------------
# internal formulas


@dataclass(frozen=True)
class Le:
    t: Lin


@dataclass(frozen=True)
class Eq:
    t: Lin


@dataclass(frozen=True)
class Ne:
    t: Lin


@dataclass(frozen=True)
class Dv:
    k: int
    t: Lin


@dataclass(frozen=True)
class Ndv:
    k: int
    t: Lin


@dataclass(frozen=True)
class Conj:
    args: tuple


@dataclass(frozen=True)
class Disj:
    args: tuple


@dataclass(frozen=True)
class Ex:
    var: str
    body: object


@dataclass(frozen=True)
class NotF:
    body: object


PT = Conj(())
PF = Disj(())
_ATOMS = (Le, Eq, Ne, Dv, Ndv)


def _gcd_all(nums) -> int:
    g = 0
    for n in nums:
        g = math.gcd(g, n)
    return g


def mk_le(t: Lin):
    if not t.coeffs:
        return PT if t.const <= 0 else PF
    g = _gcd_all(c for _, c in t.coeffs)
    if g > 1:
        # g*s + k <= 0  iff  s <= floor(-k/g)
        t = Lin(tuple((v, c // g) for v, c in t.coeffs), -((-t.const) // g))
    return Le(t)


def _eq_norm(t: Lin) -> Optional[Lin]:
    g = _gcd_all(c for _, c in t.coeffs)
    if t.const % g:
        return None
    t = Lin(tuple((v, c // g) for v, c in t.coeffs), t.const // g)
    if t.coeffs[0][1] < 0:
        t = -t
    return t


def mk_eq(t: Lin):
    if not t.coeffs:
        return PT if t.const == 0 else PF
    n = _eq_norm(t)
    return PF if n is None else Eq(n)


def mk_ne(t: Lin):
    if not t.coeffs:
        return PT if t.const != 0 else PF
    n = _eq_norm(t)
    return PT if n is None else Ne(n)


def _dv_norm(k: int, t: Lin):
    k = abs(k)
    coeffs = tuple((v, c % k) for v, c in t.coeffs if c % k)
    t = Lin(coeffs, t.const % k)
    if not coeffs:
        return k, t, t.const == 0
    g = _gcd_all([k, t.const] + [c for _, c in coeffs])
    if g > 1:
        k //= g
        t = Lin(tuple((v, c // g) for v, c in coeffs), t.const // g)
    if k == 1:
        return k, t, True
    return k, t, None


def mk_dv(k: int, t: Lin):
    k, t, val = _dv_norm(k, t)
    if val is not None:
        return PT if val else PF
    return Dv(k, t)


def mk_ndv(k: int, t: Lin):
    k, t, val = _dv_norm(k, t)
    if val is not None:
        return PF if val else PT
    return Ndv(k, t)


def negate(f):
    match f:
        case Le(t):
            return mk_le((-t).shift(1))
        case Eq(t):
            return Ne(t)
        case Ne(t):
            return Eq(t)
        case Dv(k, t):
            return Ndv(k, t)
        case Ndv(k, t):
            return Dv(k, t)
        case Conj(args):
            return mk_disj(*(negate(a) for a in args))
        case Disj(args):
            return mk_conj(*(negate(a) for a in args))
    raise TypeError(f"cannot negate {f!r}")


def _flatten(cls, fs):
    out = []
    for f in fs:
        if isinstance(f, cls):
            out.extend(f.args)
        else:
            out.append(f)
    return out


def _neg_key(coeffs):
    return tuple((v, -c) for v, c in coeffs)


def _implies_atom(a, b) -> bool:
    """Cheap syntactic entailment between two atoms."""
    if a == b:
        return True
    if a.t.coeffs != b.t.coeffs:
        return False
    ca, cb = a.t.const, b.t.const
    match a, b:
        case Le(), Le():
            return ca >= cb
        case Eq(), Le():
            return ca >= cb
        case Eq(), Ne():
            return ca != cb
        case Le(), Ne():
            return ca > cb
        case Dv(k1, _), Ndv(k2, _):
            return k1 == k2 and (ca - cb) % k1 != 0
        case Dv(k1, _), Dv(k2, _):
            return k1 % k2 == 0 and (ca - cb) % k2 == 0
    return False


class _AtomIndex:
    def __init__(self, atoms):
        self.by_key: dict = {}
        for a in atoms:
            self.by_key.setdefault(a.t.coeffs, []).append(a)

    def candidates(self, a):
        # negations flip the sign of Le terms and keep the rest
        return self.by_key.get(a.t.coeffs, []) + self.by_key.get(_neg_key(a.t.coeffs), [])

    def entails(self, a) -> bool:
        return any(_implies_atom(b, a) for b in self.candidates(a))

    def refutes(self, a) -> bool:
        n = negate(a)
        return any(_implies_atom(b, n) for b in self.candidates(n))

    def implied_by(self, a) -> bool:
        return any(_implies_atom(a, b) for b in self.candidates(a))


def _residues_cover(atoms, cls) -> bool:
    """Some (k, s) has ``cls(k, s + r)`` for every residue r mod k."""
    groups: dict = {}
    for a in atoms:
        if isinstance(a, cls):
            groups.setdefault((a.k, a.t.coeffs), set()).add(a.t.const % a.k)
    return any(len(rs) == k for (k, _), rs in groups.items())


def _clash(atoms, cls) -> bool:
    """Two ``cls`` atoms with the same modulus and variable part but different residues."""
    groups: dict = {}
    for a in atoms:
        if isinstance(a, cls):
            groups.setdefault((a.k, a.t.coeffs), set()).add(a.t.const % a.k)
    return any(len(rs) > 1 for rs in groups.values())


def mk_conj(*fs):
    items = []
    seen = set()
    bounds: dict = {}  # var-part -> largest constant among Le(s + k)
    for f in _flatten(Conj, fs):
        if f == PF:
            return PF
        if f in seen:
            continue
        seen.add(f)
        if isinstance(f, Le):
            key = f.t.coeffs
            if key in bounds and bounds[key] >= f.t.const:
                continue
            bounds[key] = f.t.const
        items.append(f)
    # drop bounds weaker than a kept one; detect s <= a together with s >= b > a
    kept = []
    for f in items:
        if isinstance(f, Le):
            key = f.t.coeffs
            if bounds[key] != f.t.const:
                continue
            opp = _neg_key(key)
            if opp in bounds and bounds[opp] + f.t.const > 0:
                return PF
        elif not isinstance(f, Disj) and negate(f) in seen:
            return PF
        kept.append(f)
    atoms = [f for f in kept if not isinstance(f, Disj)]
    if _clash(atoms, Dv) or _residues_cover(atoms, Ndv):
        return PF
    clauses = [f for f in kept if isinstance(f, Disj)]
    if clauses and atoms:
        index = _AtomIndex(atoms)
        out, changed = list(atoms), False
        for c in clauses:
            lits = [a for a in c.args if isinstance(a, (Conj, Disj)) or not index.refutes(a)]
            if any(not isinstance(a, (Conj, Disj)) and index.entails(a) for a in lits):
                changed = True
                continue
            if len(lits) != len(c.args):
                changed = True
                if not lits:
                    return PF
                out.append(mk_disj(*lits))
            else:
                out.append(c)
        if changed:
            _tick(len(out))
            return mk_conj(*out)
    if len(kept) == 1:
        return kept[0]
    return Conj(tuple(kept))


def mk_disj(*fs):
    items = []
    seen = set()
    bounds: dict = {}  # var-part -> smallest constant
    for f in _flatten(Disj, fs):
        if f == PT:
            return PT
        if f in seen:
            continue
        seen.add(f)
        if isinstance(f, Le):
            key = f.t.coeffs
            if key in bounds and bounds[key] <= f.t.const:
                continue
            bounds[key] = f.t.const
        items.append(f)
    kept = []
    for f in items:
        if isinstance(f, Le):
            key = f.t.coeffs
            if bounds[key] != f.t.const:
                continue
            opp = _neg_key(key)
            if opp in bounds and bounds[opp] + f.t.const <= 1:
                return PT
        elif not isinstance(f, (Conj, Disj)) and negate(f) in seen:
            return PT
        kept.append(f)
    atoms = [f for f in kept if not isinstance(f, Conj)]
    if _clash(atoms, Ndv) or _residues_cover(atoms, Dv):
        return PT
    cubes = [f for f in kept if isinstance(f, Conj)]
    if cubes and atoms:
        index = _AtomIndex(atoms)
        out, changed = list(atoms), False
        for c in cubes:
            # a cube implying one of the atoms is absorbed; literals whose negation
            # implies an atom are true wherever the cube still matters
            if any(not isinstance(a, (Conj, Disj)) and index.implied_by(a) for a in c.args):
                changed = True
                continue
            lits = [a for a in c.args if isinstance(a, (Conj, Disj)) or not index.implied_by(negate(a))]
            if len(lits) != len(c.args):
                changed = True
                if not lits:
                    return PT
                out.append(mk_conj(*lits))
            else:
                out.append(c)
        if changed:
            _tick(len(out))
            return mk_disj(*out)
    if len(kept) == 1:
        return kept[0]
    return Disj(tuple(kept))


def _fvars(f) -> set:
    match f:
        case Le(t) | Eq(t) | Ne(t) | Dv(_, t) | Ndv(_, t):
            return t.vars
        case Conj(args) | Disj(args):
            out = set()
            for a in args:
                out |= _fvars(a)
            return out
    raise TypeError(f"unexpected {f!r}")


def _mentions(f, x: str) -> bool:
    match f:
        case Le(t) | Eq(t) | Ne(t) | Dv(_, t) | Ndv(_, t):
            return t.coef(x) != 0
        case Conj(args) | Disj(args):
            return any(_mentions(a, x) for a in args)
    raise TypeError(f"unexpected {f!r}")


def _count_atoms(f) -> int:
    if isinstance(f, (Conj, Disj)):
        return sum(_count_atoms(a) for a in f.args)
    return 1


def _map_atoms(f, fn):
    """Rebuild ``f`` with every atom replaced by ``fn(atom)``, simplifying on the way."""
    if isinstance(f, Conj):
        return mk_conj(*(_map_atoms(a, fn) for a in f.args))
    if isinstance(f, Disj):
        return mk_disj(*(_map_atoms(a, fn) for a in f.args))
    _tick()
    return fn(f)


def _rebuild(atom, t: Lin):
    match atom:
        case Le():
            return mk_le(t)
        case Eq():
            return mk_eq(t)
        case Ne():
            return mk_ne(t)
        case Dv(k, _):
            return mk_dv(k, t)
        case Ndv(k, _):
            return mk_ndv(k, t)


def _subst(f, x: str, term: Lin):
    def fn(a):
        if a.t.coef(x) == 0:
            return a
        return _rebuild(a, a.t.subst(x, term))
    return _map_atoms(f, fn)


# ---------------------------------------------------------------------------
# Cooper's method


def _exists(x: str, phi):
    if not _mentions(phi, x):
        return phi
    if isinstance(phi, Disj):
        return mk_disj(*(_exists(x, a) for a in phi.args))
    if isinstance(phi, Conj):
        inside = [a for a in phi.args if _mentions(a, x)]
        outside = [a for a in phi.args if not _mentions(a, x)]
        if outside:
            return mk_conj(*outside, _exists(x, mk_conj(*inside)))
        for i, a in enumerate(inside):
            if isinstance(a, Eq) and abs(a.t.coef(x)) == 1:
                c = a.t.coef(x)
                # c*x + r = 0  gives  x = -c*r
                r = a.t.set_coef(x, 0)
                sol = r.scale(-c)
                rest = mk_conj(*(inside[:i] + inside[i + 1:]))
                return _subst(rest, x, sol)
        split = _distribute(inside)
        if split is not None:
            return _exists(x, split)
        shadow = _exact_shadow(x, inside)
        if shadow is not None:
            return shadow
        span = _constant_range(x, inside)
        if span is not None and span[1] - span[0] < _SPLIT_LIMIT:
            _tick(span[1] - span[0] + 1)
            return mk_disj(*(_subst(phi, x, Lin.num(v)) for v in range(span[0], span[1] + 1)))
    return _cooper(x, phi)


_SPLIT_LIMIT = 24


def _constant_range(x: str, conjuncts):
    """Tightest ``lo <= x <= hi`` stated by single-variable conjuncts, if both exist."""
    lo = hi = None
    for a in conjuncts:
        if isinstance(a, Le) and len(a.t.coeffs) == 1 and a.t.coeffs[0][0] == x:
            c = a.t.coeffs[0][1]  # c*x + k <= 0 with c = +-1 after normalization
            if c == 1:
                hi = -a.t.const if hi is None else min(hi, -a.t.const)
            elif c == -1:
                lo = a.t.const if lo is None else max(lo, a.t.const)
    if lo is None or hi is None:
        return None
    return lo, hi


_DNF_LIMIT = 64


def _distribute(conjuncts):
    """Push a conjunction through its disjunctive members when the result stays small."""
    disjs = [a for a in conjuncts if isinstance(a, Disj)]
    if not disjs:
        return None
    size = 1
    for d in disjs:
        size *= len(d.args)
        if size > _DNF_LIMIT:
            return None
    rest = [a for a in conjuncts if not isinstance(a, Disj)]
    _tick(size)
    return mk_disj(*(mk_conj(*rest, *combo) for combo in itertools.product(*(d.args for d in disjs))))


def _exact_shadow(x: str, atoms):
    """Fourier-Motzkin step for a conjunction of bounds on ``x``.

    Over the integers the projection is exact when, for every pair of a lower
    bound ``a*x >= l`` and an upper bound ``b*x <= u``, one of ``a``, ``b`` is 1.
    """
    if not all(isinstance(a, Le) for a in atoms):
        return None
    lower = [a.t for a in atoms if a.t.coef(x) < 0]
    upper = [a.t for a in atoms if a.t.coef(x) > 0]
    if any(-lo.coef(x) != 1 and up.coef(x) != 1 for lo in lower for up in upper):
        return None
    out = []
    for lo in lower:
        for up in upper:
            _tick()
            a, b = -lo.coef(x), up.coef(x)
            out.append(mk_le(up.scale(a) + lo.scale(b)))
    return mk_conj(*out)


def _atoms_with(f, x, acc):
    if isinstance(f, (Conj, Disj)):
        for a in f.args:
            _atoms_with(a, x, acc)
    elif f.t.coef(x) != 0:
        acc.append(f)
    return acc


def _cooper(x: str, phi):
    atoms = _atoms_with(phi, x, [])
    l = 1
    for a in atoms:
        l = math.lcm(l, abs(a.t.coef(x)))

    def unit(a):
        c = a.t.coef(x)
        if c == 0:
            return a
        m = l // abs(c)
        t = a.t.scale(m).set_coef(x, 1 if c > 0 else -1)
        match a:
            case Dv(k, _):
                return mk_dv(k * m, t)
            case Ndv(k, _):
                return mk_ndv(k * m, t)
        return _rebuild(a, t)

    phi = _map_atoms(phi, unit)
    if l > 1:
        phi = mk_conj(phi, mk_dv(l, Lin.var(x)))
    if not _mentions(phi, x):
        return phi
    if isinstance(phi, Conj):
        # an equality on the scaled variable pins it down; no residues to enumerate
        for i, a in enumerate(phi.args):
            if isinstance(a, Eq) and a.t.coef(x) != 0:
                sol = a.t.set_coef(x, 0).scale(-a.t.coef(x))
                return _subst(mk_conj(*(phi.args[:i] + phi.args[i + 1:])), x, sol)
    atoms = _atoms_with(phi, x, [])

    delta = 1
    lower, upper = [], []
    for a in atoms:
        c = a.t.coef(x)
        r = a.t.set_coef(x, 0)
        match a:
            case Dv(k, _) | Ndv(k, _):
                delta = math.lcm(delta, k)
            case Le():
                if c > 0:  # x <= -r
                    upper.append((-r).shift(1))
                else:  # x >= r
                    lower.append(r.shift(-1))
            case Eq() | Ne():
                e = -r if c > 0 else r
                if isinstance(a, Eq):
                    lower.append(e.shift(-1))
                    upper.append(e.shift(1))
                else:
                    lower.append(e)
                    upper.append(e)
    lower = list(dict.fromkeys(lower))
    upper = list(dict.fromkeys(upper))
    use_lower = len(lower) <= len(upper)
    points = lower if use_lower else upper

    def at_infinity(a):
        c = a.t.coef(x)
        if c == 0 or isinstance(a, (Dv, Ndv)):
            return a
        match a:
            case Le():
                is_upper = c > 0
                return PT if is_upper == use_lower else PF
            case Eq():
                return PF
            case Ne():
                return PT

    inf = _map_atoms(phi, at_infinity)
    disjuncts = []
    for j in range(1, delta + 1):
        off = j if use_lower else -j
        disjuncts.append(_subst(inf, x, Lin.num(off)))
        if disjuncts[-1] == PT:
            return PT
        for p in points:
            d = _subst(phi, x, p.shift(off))
            if d == PT:
                return PT
            disjuncts.append(d)
    return mk_disj(*disjuncts)


def _qe(f, stats: list):
    match f:
        case Conj(args):
            return mk_conj(*(_qe(a, stats) for a in args))
        case Disj(args):
            return mk_disj(*(_qe(a, stats) for a in args))
        case NotF(body):
            return negate(_qe(body, stats))
        case Ex(v, body):
            stats[0] += 1
            return _exists(v, _qe(body, stats))
    _tick()
    return f


# ---------------------------------------------------------------------------
# translation from surface formulas


class _Translator:
    def __init__(self, f):
        self.counter = itertools.count(1)
        self.f = self._rename(f, {})
        self.bools = _bool_variables(self.f)

    def fresh(self, base: str) -> str:
        return f"{base}#{next(self.counter)}"

    def _rename(self, e, ren):
        match e:
            case Var(name):
                return Var(ren.get(name, name))
            case Exists(v, s, body) | Forall(v, s, body):
                new = self.fresh(v)
                return type(e)(new, s, self._rename(body, {**ren, v: new}))
            case Neg(x) | Not(x):
                return type(e)(self._rename(x, ren))
            case BinOp(op, l, r) | Cmp(op, l, r):
                return type(e)(op, self._rename(l, ren), self._rename(r, ren))
            case Implies(l, r):
                return Implies(self._rename(l, ren), self._rename(r, ren))
            case And(args) | Or(args):
                return type(e)(tuple(self._rename(a, ren) for a in args))
            case Divides(k, x):
                return Divides(k, self._rename(x, ren))
        return e

    def formula(self, e):
        match e:
            case BoolLit(v):
                return PT if v else PF
            case Var(name):
                return mk_eq(Lin.var(name).shift(-1))
            case Not(x):
                return NotF(self.formula(x))
            case And(args):
                return Conj(tuple(self.formula(a) for a in args))
            case Or(args):
                return Disj(tuple(self.formula(a) for a in args))
            case Implies(l, r):
                return Disj((NotF(self.formula(l)), self.formula(r)))
            case Exists(v, s, body):
                return Ex(v, Conj((self._range(v, s), self.formula(body))))
            case Forall(v, s, body):
                return NotF(Ex(v, Conj((self._range(v, s), NotF(self.formula(body))))))
            case Divides(k, x):
                defs = []
                atom = mk_dv(k, self.term(x, defs))
                return self._wrap(defs, atom)
            case Cmp(op, l, r):
                if self._is_bool(l) or self._is_bool(r):
                    a, b = self.formula(l), self.formula(r)
                    iff = Disj((Conj((a, b)), Conj((NotF(a), NotF(b)))))
                    if op == "=":
                        return iff
                    if op == "!=":
                        return NotF(iff)
                    raise TypeError(f"ordering comparison on booleans: {op}")
                defs = []
                t = self.term(l, defs) - self.term(r, defs)
                atom = {
                    "<=": lambda: mk_le(t),
                    "<": lambda: mk_le(t.shift(1)),
                    ">=": lambda: mk_le(-t),
                    ">": lambda: mk_le((-t).shift(1)),
                    "=": lambda: mk_eq(t),
                    "!=": lambda: mk_ne(t),
                }[op]()
                return self._wrap(defs, atom)
        raise TypeError(f"not a formula: {e!r}")

    def _range(self, v, s):
        if s == Sort.BOOL:
            return Conj((mk_le(-Lin.var(v)), mk_le(Lin.var(v).shift(-1))))
        if s != Sort.INT:
            raise TypeError(f"cannot quantify over {s}")
        return PT

    def _is_bool(self, e) -> bool:
        if isinstance(e, Var):
            return e.name in self.bools
        return isinstance(e, (BoolLit, Cmp, Not, And, Or, Implies, Exists, Forall, Divides))

    @staticmethod
    def _wrap(defs, atom):
        f = atom
        for d, k, e in reversed(defs):
            dv = Lin.var(d)
            f = Ex(d, Conj((mk_le(dv.scale(k) - e), mk_le(e - dv.scale(k) - Lin.num(k - 1)), f)))
        return f

    def term(self, e, defs) -> Lin:
        match e:
            case IntLit(v):
                return Lin.num(v)
            case Var(name):
                return Lin.var(name)
            case Neg(x):
                return -self.term(x, defs)
            case BinOp("+", l, r):
                return self.term(l, defs) + self.term(r, defs)
            case BinOp("-", l, r):
                return self.term(l, defs) - self.term(r, defs)
            case BinOp("*", l, r):
                a, b = self.term(l, defs), self.term(r, defs)
                if not a.coeffs:
                    return b.scale(a.const)
                if not b.coeffs:
                    return a.scale(b.const)
                raise NonLinearAtom("product of two non-constant terms")
            case BinOp("/", l, r):
                k = self.term(r, defs)
                if k.coeffs or k.const <= 0:
                    raise NonLinearAtom("division by a non-constant or non-positive divisor")
                num = self.term(l, defs)
                if k.const == 1:
                    return num
                d = self.fresh("div")
                defs.append((d, k.const, num))
                return Lin.var(d)
            case StrLit():
                raise TypeError("string values are not part of the arithmetic")
        raise TypeError(f"not an integer term: {e!r}")


def _bool_variables(f) -> set:
    """Names used in boolean position (bound names are already unique)."""
    bools: set = set()
    quantified: dict = {}

    def visit(e, boolean: bool):
        match e:
            case Var(name):
                if boolean:
                    bools.add(name)
            case Not(x):
                visit(x, True)
            case And(args) | Or(args):
                for a in args:
                    visit(a, True)
            case Implies(l, r):
                visit(l, True)
                visit(r, True)
            case Exists(v, s, body) | Forall(v, s, body):
                quantified[v] = s
                if s == Sort.BOOL:
                    bools.add(v)
                visit(body, True)
            case Cmp(op, l, r):
                if op in ("=", "!=") and (_boolish(l, bools) or _boolish(r, bools)):
                    visit(l, True)
                    visit(r, True)
                else:
                    visit(l, False)
                    visit(r, False)
            case Neg(x) | Divides(_, x):
                visit(x, False)
            case BinOp(_, l, r):
                visit(l, False)
                visit(r, False)

    while True:
        before = len(bools)
        visit(f, True)
        if len(bools) == before:
            return bools


def _boolish(e, bools) -> bool:
    if isinstance(e, Var):
        return e.name in bools
    return isinstance(e, (BoolLit, Cmp, Not, And, Or, Implies, Exists, Forall, Divides))


# ---------------------------------------------------------------------------
# back to surface formulas


def _lin_expr(pairs, const: int):
    e = None
    for v, c in pairs:
        term = Var(v) if c == 1 else BinOp("*", IntLit(c), Var(v))
        e = term if e is None else BinOp("+", e, term)
    if e is None:
        return IntLit(const)
    if const > 0:
        e = BinOp("+", e, IntLit(const))
    elif const < 0:
        e = BinOp("-", e, IntLit(-const))
    return e


def _atom_expr(a, bools):
    t = a.t
    if isinstance(a, (Dv, Ndv)):
        d = Divides(a.k, _lin_expr(t.coeffs, t.const))
        return d if isinstance(a, Dv) else Not(d)
    if isinstance(a, (Eq, Ne)) and len(t.coeffs) == 1 and t.coeffs[0][0] in bools:
        (v, c), k = t.coeffs[0], t.const
        if (c, k) == (1, -1):
            return Var(v) if isinstance(a, Eq) else Not(Var(v))
        if (c, k) == (1, 0):
            return Not(Var(v)) if isinstance(a, Eq) else Var(v)
    pos = [(v, c) for v, c in t.coeffs if c > 0]
    neg = [(v, -c) for v, c in t.coeffs if c < 0]
    op = {Le: "<=", Eq: "=", Ne: "!="}[type(a)]
    if pos:
        return Cmp(op, _lin_expr(pos, 0), _lin_expr(neg, -t.const) if neg else IntLit(-t.const))
    # only negative coefficients: -n + k <= 0  is  n >= k
    op = {"<=": ">="}.get(op, op)
    return Cmp(op, _lin_expr(neg, 0), IntLit(t.const))


def _to_expr(f, bools):
    if f == PT:
        return BoolLit(True)
    if f == PF:
        return BoolLit(False)
    match f:
        case Conj(args):
            return expr_conj(*(_to_expr(a, bools) for a in args))
        case Disj(args):
            return expr_disj(*(_to_expr(a, bools) for a in args))
    return _atom_expr(f, bools)


# ---------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class QeResult:
    formula: object
    eliminated: int
    atom_count: int

    @property
    def stats(self) -> dict:
        return {"eliminatedQuantifiers": self.eliminated, "atomCount": self.atom_count}


def eliminate_quantifiers(f) -> QeResult:
    """A quantifier-free formula equivalent to ``f`` over the integers."""
    with _query():
        tr = _Translator(f)
        stats = [0]
        out = _qe(tr.formula(tr.f), stats)
        return QeResult(_to_expr(out, tr.bools), stats[0], 0 if out in (PT, PF) else _count_atoms(out))


def _closed_truth(f) -> bool:
    tr = _Translator(f)
    ranges = [tr._range(v, Sort.BOOL) for v in sorted(free_variables(tr.f)) if v in tr.bools]
    return _sat(mk_conj(*ranges, _qe(tr.formula(tr.f), [0])))


def _sat(f) -> bool:
    """Satisfiability of a quantifier-free formula: case split on disjunctions,
    eliminate variables from conjunctions of atoms."""
    if f == PT:
        return True
    if f == PF:
        return False
    _tick()
    if isinstance(f, Disj):
        return any(_sat(a) for a in f.args)
    args = f.args if isinstance(f, Conj) else (f,)
    disjs = [a for a in args if isinstance(a, Disj)]
    if disjs:
        # a variable confined to a small range: try its values instead of splitting clauses
        for x in sorted(_fvars(f)):
            span = _constant_range(x, args)
            if span is not None and span[1] - span[0] < _SPLIT_LIMIT:
                return any(_sat(_subst(f, x, Lin.num(v))) for v in range(span[0], span[1] + 1))
        pick = min(disjs, key=lambda d: len(d.args))
        rest = [a for a in args if a is not pick]
        return any(_sat(mk_conj(*rest, arm)) for arm in pick.args)
    counts: dict = {}
    for a in args:
        for v, _ in a.t.coeffs:
            counts[v] = counts.get(v, 0) + 1
    x = min(counts, key=lambda v: (counts[v], v))
    return _sat(_exists(x, f))


@lru_cache(maxsize=4096)
def _sat_cached(f, budget) -> bool:
    return _closed_truth(f)


def is_satisfiable(f) -> bool:
    """True iff some assignment of the free variables satisfies ``f``."""
    with _query():
        return _sat_cached(f, _budget.get()[1])


def is_valid(f) -> bool:
    """True iff every assignment of the free variables satisfies ``f``."""
    return not is_satisfiable(Not(f))


def implies(hypothesis, conclusion) -> bool:
    return is_valid(Implies(hypothesis, conclusion))
