import random

import pytest
from hypothesis import given, settings, strategies as st

from sessionkit.diagnostics import UnmergeableBranches
from sessionkit.model import LEnd, LRec, global_participants, strip_assertions_global, strip_assertions_local
from sessionkit.parser import parse_global
from sessionkit.printer import show_formula, show_local
from sessionkit.projection import project, project_all
from sessionkit.typecheck import infer_all, infer_type

from plain_oracles import NotMergeable, plain_project, plain_type, process_for, random_global, shape

BUYER_SELLER = {
    "B1": "s!<t:string>[true];b1?<q:int>[q>0];b2!<c:int>[0<c && c<=q];end",
    "S": ("s?<t:string>[true];b1!<q:int>[q>0];s&id{"
          "[exists c:int. 0<c && c<=q && q>0] ok: s?<a:string>[exists c:int. 0<c && c<=q && q>0];"
          "b2!<d:date>[true];end, [exists c:int. 0<c && c<=q && q>0] quit: end}"),
    "B2": ("b2?<c:int>[exists q:int. 0<c && c<=q && q>0];s+id{[true] ok: s!<a:string>[true];"
           "b2?<d:date>[exists q:int. 0<c && c<=q && q>0];end, [true] quit: end}"),
}


def test_buyer_seller_projections(buyer_seller):
    got = {p: show_local(t) for p, t in project_all(buyer_seller.global_)}
    assert got == BUYER_SELLER
    assert [p for p, _ in project_all(buyer_seller.global_)] == ["B1", "S", "B2"]


def test_guessing_game_generator_is_not_recursive(guessing_game):
    projections = dict(project_all(guessing_game.global_))
    assert show_local(projections["G"]) == "k!<n:int>[n>0];end"
    assert isinstance(projections["P"].cont, LRec) and isinstance(projections["S"].cont.cont, LRec)


def test_projected_invariant_hides_unknown_variables(guessing_game):
    p = project(guessing_game.global_, "P").cont
    assert show_formula(p.invariant) == "0<=cpt && cpt<10"
    g = parse_global("A -> B : k(n:int)[n > 0]; mu t(0)(r:int)[r < n]. B -> C : l(y:int)[-]; t(y)")
    assert show_formula(project(g, "C").invariant) == "exists n:int. r<n"
    assert show_formula(project(g, "B").cont.invariant) == "r<n"


def test_rely_quantifies_most_recent_outermost():
    g = parse_global("A -> B : k(x:int)[x > 0]; A -> B : k(y:int)[y > x]; B -> C : l(z:int)[z > y]; end")
    c = project(g, "C")
    assert show_formula(c.assertion) == "exists y:int. exists x:int. z>y && y>x && x>0"


def test_sender_keeps_its_guarantee():
    g = parse_global("A -> B : k(x:int)[x > 0]; B -> A : k(y:int)[y > x]; end")
    a = project(g, "A")
    assert show_formula(a.assertion) == "x>0"
    assert show_formula(a.cont.assertion) == "y>x && x>0"


def test_uninvolved_participant_must_not_observe_choice():
    g = parse_global("A -> B : k&id{[-] ok: B -> C : l(x:int)[-]; end, [-] ko: end}")
    with pytest.raises(UnmergeableBranches) as info:
        project(g, "C")
    assert info.value.participant == "C"


def test_uninvolved_participant_with_equal_arms():
    g = parse_global("A -> B : k&id{[-] ok: B -> C : l(x:int)[-]; end, [-] ko: B -> C : l(x:int)[-]; end}")
    assert show_local(project(g, "C")) == "l?<x:int>[true];end"


def test_uninvolved_arms_merge_up_to_payload_names():
    g = parse_global("A -> B : k&id{[-] ok: B -> C : l(x:int)[x>0]; C -> B : l(u:int)[u>x]; end, "
                     "[-] ko: B -> C : l(y:int)[y>0]; C -> B : l(w:int)[w>y]; end}")
    assert show_local(project(g, "C")) == "l?<x:int>[x>0];l!<u:int>[u>x];end"
    g = parse_global("A -> B : k&id{[-] ok: B -> C : l(x:int)[x>0]; end, [-] ko: B -> C : l(y:int)[y>1]; end}")
    with pytest.raises(UnmergeableBranches):
        project(g, "C")


def test_recursion_without_participant_projects_to_end():
    g = parse_global("A -> C : l(z:int)[-]; mu t(0)(i:int)[-]. A -> B : k(x:int)[-]; t(x)")
    assert show_local(project(g, "C")) == "l?<z:int>[true];end"
    assert project(parse_global("mu t(0)(i:int)[-]. A -> B : k(x:int)[-]; t(x)"), "C") == LEnd()


def _projectable_globals(count, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        g = random_global(rng)
        roles = global_participants(g)
        if len(roles) < 2:
            continue
        try:
            plain = {p: plain_project(g, p) for p in roles}
        except NotMergeable:
            with pytest.raises(UnmergeableBranches):
                project_all(g)
            continue
        out.append((g, plain))
    return out


def test_projection_agrees_with_plain_projector():
    cases = _projectable_globals(150, seed=7)
    assert len(cases) >= 100
    for g, plain in cases:
        got = {p: shape(t) for p, t in project_all(g)}
        assert got == plain


def test_erased_inference_agrees_with_plain_typing():
    cases = _projectable_globals(120, seed=11)
    checked = 0
    for g, plain in cases:
        roles = global_participants(g)
        channels = ("k", "l")
        for i, (p, t) in enumerate(project_all(g)):
            proc = process_for(t, p, "svc", roles, channels, init=(i == 0))
            env = infer_type(proc)
            (inferred,) = env.entries.values()
            erased = strip_assertions_local(inferred)
            assert shape(erased) == plain_type(proc) == plain[p]
            checked += 1
    assert checked >= 200


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_projection_commutes_with_erasure(seed):
    g = random_global(random.Random(seed))
    stripped = strip_assertions_global(g)
    try:
        expected = {p: plain_project(stripped, p) for p in global_participants(g)}
    except NotMergeable:
        return
    assert {p: shape(strip_assertions_local(t)) for p, t in project_all(g)} == expected


def test_inference_is_deterministic(buyer_seller, guessing_game):
    for pf in (buyer_seller, guessing_game):
        a, b = infer_all(pf), infer_all(pf)
        assert a.environment.entries == b.environment.entries
        assert a.types == b.types
