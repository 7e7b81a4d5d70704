from __future__ import annotations

import pytest
from hypothesis import given

from conftest import generated, raw_terms
from oracles import duplicate_params
from contpass.parser import (
    DIAGNOSTIC_CODES,
    ParseError,
    parse_expr,
    parse_term,
    validate,
)
from contpass.terms import BinOp, Int, Lit, Var, lit, pretty_print, running_example


def _diagnostics(src):
    with pytest.raises(ParseError) as info:
        parse_term(src)
    return info.value.diagnostics


class TestParse:
    def test_running_example(self):
        src = "letrec g(x) = { letrec h() = { x } in h() } in g(1)"
        assert parse_term(src) == running_example()

    def test_conditional(self):
        from contpass.terms import If

        assert parse_term("if true then { 1 } else { 2 }") == If(lit(True), lit(1), lit(2))

    def test_sequence_is_right_associative(self):
        t = parse_term("a; b; c")
        assert pretty_print(t.second) == "b; c"

    def test_assignment_binds_tighter_than_sequence(self):
        t = parse_term("x := 1; x")
        assert pretty_print(t.first) == "x := 1"

    def test_line_comments(self):
        assert parse_term("// nothing here\n42 // trailing\n") == lit(42)

    def test_expression_precedence(self):
        assert parse_expr("x + 1 < 5") == BinOp(
            "lt", BinOp("add", Var("x"), Lit(Int(1))), Lit(Int(5))
        )

    def test_spans_point_into_source(self):
        src = "letrec f(a) = {\n  a\n} in f(1)"
        t = parse_term(src)
        body = t.body
        assert (body.span.line, body.span.column) == (2, 3)
        assert src[body.span.start_offset:body.span.end_offset] == "a"


class TestDiagnostics:
    def test_incomplete_assignment(self):
        [d] = _diagnostics("x := ")
        assert d.code == "PARSE_UNEXPECTED_TOKEN"
        assert (d.span.line, d.span.column) == (1, 6)
        assert d.span.start_offset == len("x := ")

    def test_unterminated_block(self):
        [d] = _diagnostics("if true then { 1 ")
        assert d.code == "PARSE_UNTERMINATED"

    def test_bad_character(self):
        [d] = _diagnostics("1 +* 2")
        assert d.code == "PARSE_BAD_CHAR"
        assert d.span.column == 4

    def test_keyword_is_not_an_identifier(self):
        [d] = _diagnostics("in := 1")
        assert d.code == "PARSE_UNEXPECTED_TOKEN"

    def test_render_format(self):
        [d] = _diagnostics("x := ")
        assert d.render().startswith("1:6: PARSE_UNEXPECTED_TOKEN: ")

    def test_codes_are_documented(self):
        with pytest.raises(ValueError):
            from contpass.parser import NO_SPAN, Diagnostic

            Diagnostic(NO_SPAN, "error", "MADE_UP", "nope")
        assert "PARSE_UNEXPECTED_TOKEN" in DIAGNOSTIC_CODES


class TestValidate:
    def test_closed_example(self):
        assert validate(running_example()) == []

    def test_open_term(self):
        [d] = validate(parse_term("x"))
        assert d.code == "SCOPE_UNBOUND_VAR"
        assert "x" in d.message

    def test_unbound_function(self):
        [d] = validate(parse_term("f(1)"))
        assert d.code == "SCOPE_UNBOUND_FUN"

    def test_duplicate_parameter_across_functions(self):
        t = parse_term("letrec f(x) = { x } in letrec g(x) = { x } in f(g(1))")
        assert duplicate_params(t) == {"x"}
        [d] = validate(t)
        assert d.code == "UNIQ_PARAM"
        assert "x" in d.message

    def test_shadowing_allowed_when_requested(self):
        t = parse_term("letrec g(x) = { letrec h(x) = { x } in h(x) } in g(1)")
        assert [d.code for d in validate(t)] == ["UNIQ_PARAM"]
        assert validate(t, shadow_ok={"x"}) == []

    def test_assignment_to_unbound(self):
        [d] = validate(parse_term("letrec f(a) = { b := 1 } in f(1)"))
        assert d.code == "SCOPE_UNBOUND_VAR"

    def test_function_names_are_not_variables(self):
        [d] = validate(parse_term("letrec f(a) = { a } in f"))
        assert d.code == "SCOPE_UNBOUND_VAR"


class TestRoundTrip:
    @given(raw_terms)
    def test_any_syntax(self, t):
        assert parse_term(pretty_print(t)) == t

    @given(generated())
    def test_generated_terms(self, t):
        assert validate(t) == []
        assert parse_term(pretty_print(t)) == t

    @given(generated("convertible"))
    def test_convertible_terms(self, t):
        assert parse_term(pretty_print(t)) == t
