import itertools

import pytest
from hypothesis import given, settings, strategies as st

from sessionkit.analysis import (
    II, IO, OO, KnowledgeMap, Prefix, check_linearity, check_well_asserted, dependencies,
    prefixes_along, unfold_once,
)
from sessionkit.model import GEnd, GInteraction, GRec, Sort, TRUE
from sessionkit.parser import parse_global
from sessionkit.printer import show_expr

PARTICIPANTS = ("A", "B", "C")
CHANNELS = ("k", "l")


# the three case tables, transcribed guard by guard
def dep_ii(n1, n2):
    (p1, p, k1), (p2, q, k2) = n1, n2
    if k1 != k2:
        return q == p
    return p1 == p2 and p == q


def dep_io(n1, n2):
    (_, p, k1), (q, _, k2) = n1, n2
    if k1 != k2:
        return q == p
    return False


def dep_oo(n1, n2):
    (p, _, k1), (q, _, k2) = n1, n2
    if k1 == k2:
        return q == p
    return False


def all_prefixes():
    return [(s, r, k) for s, r in itertools.permutations(PARTICIPANTS, 2) for k in CHANNELS]


def test_dependency_tables_on_full_grid():
    pairs = 0
    for n1, n2 in itertools.product(all_prefixes(), repeat=2):
        got = dependencies(Prefix(*n1, 0), Prefix(*n2, 1))
        assert (II in got) == dep_ii(n1, n2), (n1, n2)
        assert (IO in got) == dep_io(n1, n2), (n1, n2)
        assert (OO in got) == dep_oo(n1, n2), (n1, n2)
        pairs += 1
    assert pairs == 144


def test_dependencies_need_order():
    with pytest.raises(ValueError):
        dependencies(Prefix("A", "B", "k", 3), Prefix("A", "B", "k", 1))


def test_race_is_not_linear():
    report = check_linearity(unfold_once(parse_global("A -> B : k(x:int)[-]. C -> D : k(y:int)[-]; end")))
    assert not report.ok
    assert report.violations[0].kind == "Linearity"
    assert report.violations[0].line == 1


def test_examples_are_linear(buyer_seller, guessing_game):
    assert check_linearity(unfold_once(buyer_seller.global_)).ok
    assert check_linearity(unfold_once(guessing_game.global_)).ok


def test_relay_on_one_channel_is_not_linear():
    g = parse_global("A -> B : k(x:int)[-]; B -> C : k(y:int)[-]; end")
    assert not check_linearity(g).ok


def test_repeated_use_by_same_pair_is_linear():
    g = parse_global("A -> B : k(x:int)[-]; A -> B : k(y:int)[-]; end")
    assert check_linearity(g).ok


# an independent linearity check: explicit dependency graph and path search
def _chains(seq):
    n = len(seq)
    edges = {}
    for i, j in itertools.combinations(range(n), 2):
        a, b = seq[i], seq[j]
        edges[i, j] = {x for x, f in ((II, dep_ii), (IO, dep_io), (OO, dep_oo)) if f(a, b)}
    return edges


def _reach(edges, n, i, j, allowed, last=None):
    # is there a path i -> ... -> j using only ``allowed`` labels, final edge in ``last``?
    last = last or allowed
    frontier = {i}
    seen = set()
    while frontier:
        m = frontier.pop()
        for t in range(m + 1, n):
            labels = edges[m, t]
            if t == j and labels & last:
                return True
            if t < j and labels & allowed and t not in seen:
                seen.add(t)
                frontier.add(t)
    return False


def oracle_linear(seq) -> bool:
    edges = _chains(seq)
    n = len(seq)
    for i, j in itertools.combinations(range(n), 2):
        if seq[i][2] != seq[j][2]:
            continue
        out_chain = _reach(edges, n, i, j, {IO, OO})
        in_chain = seq[i][1] == seq[j][1] or _reach(edges, n, i, j, {II, IO}, {II})
        if not (out_chain and in_chain):
            return False
    return True


def build(seq):
    g = GEnd()
    for idx, (s, r, k) in reversed(list(enumerate(seq))):
        g = GInteraction(s, r, k, f"v{idx}", Sort.INT, TRUE, g)
    return g


@settings(max_examples=400, deadline=None)
@given(st.lists(st.sampled_from(all_prefixes()), min_size=1, max_size=6))
def test_linearity_agrees_with_path_search(seq):
    assert check_linearity(build(seq)).ok == oracle_linear(seq)


def test_unfolding_prefix_counts(guessing_game):
    paths = prefixes_along(guessing_game.global_)
    assert sorted(len(p) for p in paths) == [3, 3, 4, 4]
    unfolded = prefixes_along(unfold_once(guessing_game.global_))
    assert sorted(len(p) for p in unfolded) == [3, 3, 5, 5, 5, 5, 6, 6, 6, 6]


def test_unfolding_substitutes_call_arguments(guessing_game):
    rec = unfold_once(guessing_game.global_).cont.cont
    assert isinstance(rec, GRec)
    for arm in rec.body.arms[:2]:
        copy = arm.body.cont
        assert isinstance(copy, GRec) and copy.invariant == rec.invariant
        assert [show_expr(p.init) for p in copy.params] == ["y", "cpt+1"]


def test_unfolding_without_recursion_is_identity(buyer_seller):
    assert unfold_once(buyer_seller.global_) == buyer_seller.global_


def test_examples_are_well_asserted(buyer_seller, guessing_game):
    assert check_well_asserted(buyer_seller.global_).ok
    assert check_well_asserted(guessing_game.global_).ok


def test_unsatisfiable_assertion_reported():
    report = check_well_asserted(parse_global("A -> B : k(x:int)[x > 0 && x < 0]; end"))
    assert [v.kind for v in report.violations] == ["TemporalSatisfiability"]


def test_history_sensitivity_names_the_variable():
    g = parse_global("A -> B : k(q:int)[q > 0];\nC -> A : l(c:int)[c <= q]; end")
    report = check_well_asserted(g)
    hs = [v for v in report.violations if v.kind == "HistorySensitivity"]
    assert len(hs) == 1
    assert hs[0].details["variable"] == "q" and hs[0].details["participant"] == "C"
    assert hs[0].line == 2


def test_branch_without_selectable_label():
    g = parse_global("A -> B : k(x:int)[x > 0]; B -> A : l&id{[x < 0] a: end, [x = 0] b: end}")
    report = check_well_asserted(g)
    assert [v.kind for v in report.violations] == ["TemporalSatisfiability"]


def test_invariant_checked_on_entry_and_at_calls():
    entry = check_well_asserted(parse_global("mu t(0)(r:int)[r > 0]. A -> B : k(y:int)[y > r]; t(y)"))
    assert [v.kind for v in entry.violations] == ["InvariantUnsatisfied"]
    call = check_well_asserted(parse_global("mu t(1)(r:int)[r > 0]. A -> B : k(y:int)[-]; t(y)"))
    assert [v.kind for v in call.violations] == ["InvariantUnsatisfied"]
    ok = check_well_asserted(parse_global("mu t(1)(r:int)[r > 0]. A -> B : k(y:int)[y > r]; t(y)"))
    assert ok.ok


def test_knowledge_map():
    km = KnowledgeMap().learn("A", ["x"]).learn("B", ["x", "y"]).learn("A", ["z"])
    assert km.of("A") == {"x", "z"}
    assert km.of("B") == {"x", "y"}
    assert km.of("C") == frozenset()
