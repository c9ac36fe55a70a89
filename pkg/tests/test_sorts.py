import pytest

from sessionkit.diagnostics import DuplicateLabel, SortError, UnknownRecursionVariable, WellFormednessError
from sessionkit.model import Sort
from sessionkit.parser import parse_formula, parse_global, parse_process
from sessionkit.sorts import compatible, infer_formula_sorts


def test_inferred_sorts():
    assert infer_formula_sorts(parse_formula("b && x > 1")) == {"b": Sort.BOOL, "x": Sort.INT}


@pytest.mark.parametrize("text", [
    "x * y > 0",
    "x / y > 0",
    "x / 0 > 0",
    "\"a\" = x",
])
def test_non_presburger_formulas_rejected(text):
    with pytest.raises(SortError):
        parse_formula(text)


def test_division_by_positive_literal_allowed():
    parse_formula("(x + 1) / 2 <= x")


def test_string_variables_not_assertable():
    with pytest.raises(SortError, match="string variable 't'"):
        parse_global("A -> B : k(t:string)[t > 0]; end")


def test_assertion_sort_mismatch():
    with pytest.raises(SortError):
        parse_global("A -> B : k(x:bool)[x > 0]; end")


def test_self_interaction_rejected():
    with pytest.raises(WellFormednessError, match="itself"):
        parse_global("A -> A : k(x:int)[-]; end")


def test_rebinding_on_path_rejected():
    with pytest.raises(WellFormednessError, match="already bound"):
        parse_global("A -> B : k(x:int)[-]; B -> A : k(x:int)[-]; end")


def test_duplicate_labels_rejected():
    with pytest.raises(DuplicateLabel):
        parse_global("A -> B : k&id{[-] ok: end, [-] ok: end}")


def test_unknown_recursion_variable():
    with pytest.raises(UnknownRecursionVariable):
        parse_global("A -> B : k(x:int)[-]; t(x)")


def test_call_arity_checked():
    with pytest.raises(WellFormednessError, match="expected 1"):
        parse_global("mu t(0)(x:int)[-]. A -> B : k(y:int)[-]; t(y, y)")


def test_rec_init_sort_checked():
    with pytest.raises(SortError):
        parse_global("mu t(true)(x:int)[-]. A -> B : k(y:int)[-]; t(y)")


def test_process_payload_sort_checked():
    with pytest.raises(SortError):
        parse_process("k!(true)(x:int)[-]; 0")


def test_process_sends_string_to_date():
    parse_process("k!(\"2026-01-01\")(d:date)[-]; 0")
    assert compatible(Sort.STRING, Sort.DATE)
    assert not compatible(Sort.INT, Sort.BOOL)


def test_process_unknown_variable():
    with pytest.raises(SortError, match="unknown variable 'z'"):
        parse_process("k!(z)(x:int)[-]; 0")
