from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import NAMES, generated, raw_terms, values
from oracles import free_vars_walk, subst_debruijn, to_debruijn
from contpass.parser import parse_term
from contpass.terms import (
    BinOp,
    Bool,
    Call,
    E,
    If,
    Int,
    LetRec,
    Lit,
    Seq,
    Assign,
    Var,
    free_vars,
    lit,
    pretty_print,
    running_example,
    running_example_lifted,
    size,
    subst_values,
    subterms,
    var,
)


class TestValues:
    def test_rendering(self):
        assert str(Int(-3)) == "-3"
        assert str(Bool(True)) == "true"
        assert pretty_print(lit(None)) == "unit"

    def test_binop_rejects_unknown_operator(self):
        with pytest.raises(ValueError):
            BinOp("mul", Lit(Int(1)), Lit(Int(2)))

    def test_letrec_rejects_repeated_params(self):
        with pytest.raises(ValueError):
            LetRec("f", ("x", "x"), var("x"), Call("f", (lit(1), lit(2))))


class TestPrettyPrint:
    def test_literal(self):
        assert pretty_print(E(Lit(Int(1)))) == "1"

    def test_running_example(self):
        assert pretty_print(running_example()) == (
            "letrec g(x) = { letrec h() = { x } in h() } in g(1)"
        )

    def test_lifted_example(self):
        assert pretty_print(running_example_lifted()) == (
            "letrec g(x) = { letrec h(x) = { x } in h(x) } in g(1)"
        )

    def test_assignment_then_read(self):
        assert pretty_print(Seq(Assign("x", E(Lit(Int(2)))), E(Var("x")))) == "x := 2; x"

    def test_precedence(self):
        e = BinOp("sub", Lit(Int(1)), BinOp("sub", Lit(Int(2)), Lit(Int(3))))
        assert pretty_print(E(e)) == "1 - (2 - 3)"
        e = BinOp("lt", BinOp("add", Var("x"), Lit(Int(1))), Lit(Int(5)))
        assert pretty_print(E(e)) == "x + 1 < 5"

    def test_nested_sequence_is_braced(self):
        t = Seq(Seq(var("a"), var("b")), var("c"))
        assert pretty_print(t) == "{ a; b }; c"


class TestFreeVars:
    def test_single_variable(self):
        assert free_vars(var("x")) == {"x"}

    def test_inner_body_of_example(self):
        t = parse_term("letrec h() = { x } in h()")
        assert free_vars(t) == {"x"}

    def test_parameter_binds_body_only(self):
        t = parse_term("letrec h(y) = { y } in h(x)")
        assert free_vars_walk(t) == {"x"}
        assert free_vars(t) == {"x"}

    def test_assignment_target_counts(self):
        assert free_vars(parse_term("z := 1")) == {"z"}

    def test_closed_example(self):
        assert free_vars(running_example()) == frozenset()

    @given(raw_terms)
    def test_matches_walk(self, t):
        assert free_vars(t) == free_vars_walk(t)


class TestSubst:
    def test_variable(self):
        assert subst_values(var("x"), {"x": Int(3)}) == lit(3)

    def test_inside_nested_call(self):
        t = parse_term("g(2, f(x))")
        out = subst_values(t, {"x": Int(7)})
        assert to_debruijn(out) == subst_debruijn(to_debruijn(t), {"x": Int(7)})
        assert pretty_print(out) == "g(2, f(7))"

    def test_shadowed_parameter(self):
        t = parse_term("letrec h(x) = { x } in h(x)")
        out = subst_values(t, {"x": Int(1)})
        assert to_debruijn(out) == subst_debruijn(to_debruijn(t), {"x": Int(1)})
        assert pretty_print(out) == "letrec h(x) = { x } in h(1)"

    def test_assigned_variable_is_refused(self):
        with pytest.raises(ValueError):
            subst_values(parse_term("x := 1"), {"x": Int(0)})

    @given(raw_terms)
    def test_empty_map_is_identity(self, t):
        assert subst_values(t, {}) == t

    @given(raw_terms, st.dictionaries(st.sampled_from(NAMES), values, max_size=3))
    def test_removes_substituted_names(self, t, m):
        try:
            out = subst_values(t, m)
        except ValueError:
            assigned = {s.x for s in subterms(t) if isinstance(s, Assign)}
            assert assigned & set(m)
            return
        assert free_vars(out) == free_vars(t) - set(m)
        assert to_debruijn(out) == subst_debruijn(to_debruijn(t), m)


class TestStructure:
    def test_size_counts_terms(self):
        assert size(parse_term("if true then { 1 } else { 2 }")) == 4

    @given(generated())
    def test_subterms_start_with_self(self, t):
        first = next(iter(subterms(t)))
        assert first is t
        assert sum(1 for _ in subterms(t)) == size(t)

    def test_spans_do_not_affect_equality(self):
        parsed = parse_term("if true then { 1 } else { 2 }")
        assert parsed == If(lit(True), lit(1), lit(2))
