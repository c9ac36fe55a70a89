"""Random bounded Presburger formulas and a brute-force evaluator over numpy grids.

Every variable, free or bound, is confined to [-B, B] by the formula itself
(free ones by a guard the caller adds, bound ones by a guard inside the
quantifier), so enumerating that window decides the formula exactly.
"""
import random

import numpy as np

from sessionkit.model import (
    And, BinOp, BoolLit, Cmp, Divides, Exists, Forall, Implies, IntLit, Not, Or, Sort, Var,
)

B = 3
FREE = ("x", "y", "z")
BOUND = ("u", "w")
ALL = FREE + BOUND
AXIS = {v: i for i, v in enumerate(ALL)}


def window(v):
    return And((Cmp("<=", IntLit(-B), Var(v)), Cmp("<=", Var(v), IntLit(B))))


def guard(vs):
    return And(tuple(window(v) for v in vs)) if vs else BoolLit(True)


class Gen:
    def __init__(self, seed: int, family: str):
        self.rng = random.Random(seed)
        self.family = family

    def term(self, scope):
        r = self.rng
        used = r.sample(scope, r.randint(1, min(3, len(scope))))
        t = IntLit(r.randint(-10, 10))
        for v in used:
            c = r.randint(-5, 5)
            part = Var(v) if c == 1 else BinOp("*", IntLit(c), Var(v))
            t = BinOp("+", t, part)
        if self.family == "C" and r.random() < 0.3:
            t = BinOp("/", t, IntLit(r.randint(1, 3)))
        return t

    def atom(self, scope):
        op = self.rng.choice(["=", "!=", "<", "<=", ">", ">="])
        return Cmp(op, self.term(scope), IntLit(self.rng.randint(-5, 5)))

    def body(self, scope, depth):
        r = self.rng
        if depth == 0 or r.random() < 0.3:
            return self.atom(scope)
        k = r.random()
        if k < 0.35:
            return And((self.body(scope, depth - 1), self.body(scope, depth - 1)))
        if k < 0.7:
            return Or((self.body(scope, depth - 1), self.body(scope, depth - 1)))
        if k < 0.85:
            return Not(self.body(scope, depth - 1))
        return Implies(self.body(scope, depth - 1), self.body(scope, depth - 1))

    def quantified(self, scope, quants):
        if not quants:
            return self.body(scope, 2)
        v = quants[0]
        inner = self.quantified(scope + [v], quants[1:])
        if self.rng.random() < 0.5:
            return Exists(v, Sort.INT, And((window(v), inner)))
        return Forall(v, Sort.INT, Implies(window(v), inner))

    def formula(self):
        """(free variables, body) with at most 3 free and 2 bound variables."""
        r = self.rng
        free = list(FREE[: r.randint(1, 3)])
        nq = {"A": 0, "B": 1, "C": r.randint(1, 2)}[self.family]
        return free, self.quantified(free, list(BOUND[:nq]))


def _grid():
    axes = np.arange(-B, B + 1)
    return np.meshgrid(*([axes] * len(ALL)), indexing="ij", sparse=True)


GRID = _grid()


def evaluate(e, env):
    """Vectorised value of ``e``; ``env`` maps variable names to broadcastable arrays."""
    match e:
        case IntLit(v):
            return np.int64(v)
        case BoolLit(v):
            return np.bool_(v)
        case Var(name):
            return env[name]
        case BinOp("+", l, r):
            return evaluate(l, env) + evaluate(r, env)
        case BinOp("-", l, r):
            return evaluate(l, env) - evaluate(r, env)
        case BinOp("*", l, r):
            return evaluate(l, env) * evaluate(r, env)
        case BinOp("/", l, r):
            return np.floor_divide(evaluate(l, env), evaluate(r, env))
        case Cmp(op, l, r):
            a, b = evaluate(l, env), evaluate(r, env)
            return {"=": np.equal, "!=": np.not_equal, "<": np.less, "<=": np.less_equal,
                    ">": np.greater, ">=": np.greater_equal}[op](a, b)
        case Divides(k, x):
            return np.equal(np.mod(evaluate(x, env), k), 0)
        case Not(x):
            return np.logical_not(evaluate(x, env))
        case And(args):
            out = np.bool_(True)
            for a in args:
                out = np.logical_and(out, evaluate(a, env))
            return out
        case Or(args):
            out = np.bool_(False)
            for a in args:
                out = np.logical_or(out, evaluate(a, env))
            return out
        case Implies(l, r):
            return np.logical_or(np.logical_not(evaluate(l, env)), evaluate(r, env))
        case Exists(v, _, body):
            val = np.broadcast_to(evaluate(body, env), _full_shape())
            return np.any(val, axis=AXIS[v], keepdims=True)
        case Forall(v, _, body):
            val = np.broadcast_to(evaluate(body, env), _full_shape())
            return np.all(val, axis=AXIS[v], keepdims=True)
    raise TypeError(e)


def _full_shape():
    return (2 * B + 1,) * len(ALL)


def truth_table(f):
    """Boolean array over the full grid (bound axes collapsed to size 1)."""
    env = {v: GRID[AXIS[v]] for v in ALL}
    return np.broadcast_to(evaluate(f, env), _full_shape())


def brute_satisfiable(free, body) -> bool:
    return bool(np.any(truth_table(And((guard(free), body)))))


def brute_valid(free, body) -> bool:
    return bool(np.all(truth_table(Implies(guard(free), body))))
