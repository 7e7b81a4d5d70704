"""Concrete syntax and scope validation for the mini language.

Grammar::

    term  := stmt (";" term)?
    stmt  := "letrec" ident "(" params ")" "=" "{" term "}" "in" term
           | ident ":=" stmt
           | "if" term "then" "{" term "}" "else" "{" term "}"
           | "{" term "}"
           | ident "(" args ")"
           | expr
    expr  := sum (("<" | "==") sum)?
    sum   := atom (("+" | "-") atom)*
    atom  := int | "-" int | "true" | "false" | "unit" | ident | "(" expr ")"

``{ term }`` groups a term; it is how the pretty printer writes sequences
that are nested to the left.  Line comments start with ``//``.

Diagnostic codes:

    PARSE_UNEXPECTED_TOKEN  a token that does not fit the grammar
    PARSE_UNTERMINATED      input ends inside a bracketed construct
    PARSE_BAD_CHAR          a character that starts no token
    SCOPE_UNBOUND_VAR       variable read or assigned outside any binding parameter
    SCOPE_UNBOUND_FUN       call to a function no enclosing letrec defines
    UNIQ_PARAM              a parameter name bound more than once in the program
    CONV_CALL_IN_EXPR       a call where the convertible form only allows an expression
    CONV_NESTED_NOT_LAST    a nested call in an argument other than the last
    CONV_SHAPE              any other construct outside the convertible form
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Collection

from .terms import (
    BINOP_OF_SYMBOL,
    FALSE,
    TRUE,
    UNIT,
    Assign,
    BinOp,
    Call,
    E,
    Expr,
    If,
    Int,
    LetRec,
    Lit,
    Seq,
    Term,
    Var,
    children,
    expr_vars,
)

KEYWORDS = frozenset({"letrec", "in", "if", "then", "else", "true", "false", "unit"})

DIAGNOSTIC_CODES = frozenset(
    {
        "PARSE_UNEXPECTED_TOKEN",
        "PARSE_UNTERMINATED",
        "PARSE_BAD_CHAR",
        "SCOPE_UNBOUND_VAR",
        "SCOPE_UNBOUND_FUN",
        "UNIQ_PARAM",
        "CONV_CALL_IN_EXPR",
        "CONV_NESTED_NOT_LAST",
        "CONV_SHAPE",
    }
)


@dataclass(frozen=True)
class SourceSpan:
    start_offset: int
    end_offset: int
    line: int
    column: int

    def __post_init__(self) -> None:
        if self.start_offset > self.end_offset:
            raise ValueError("span ends before it starts")


NO_SPAN = SourceSpan(0, 0, 1, 1)


@dataclass(frozen=True)
class Diagnostic:
    span: SourceSpan
    severity: str
    code: str
    message: str

    def __post_init__(self) -> None:
        if self.code not in DIAGNOSTIC_CODES:
            raise ValueError(f"undocumented diagnostic code {self.code}")

    def render(self) -> str:
        return f"{self.span.line}:{self.span.column}: {self.code}: {self.message}"


class ParseError(Exception):
    """Raised by :func:`parse_term`; carries at least one diagnostic."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(d.render() for d in diagnostics))
        self.diagnostics = diagnostics


# --------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>:=|==|[-+<;,(){}=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "sym", "eof"
    text: str
    span: SourceSpan


def _line_starts(src: str) -> list[int]:
    starts = [0]
    starts.extend(m.end() for m in re.finditer("\n", src))
    return starts


class _Positions:
    def __init__(self, src: str):
        self.starts = _line_starts(src)

    def span(self, start: int, end: int) -> SourceSpan:
        lo, hi = 0, len(self.starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.starts[mid] <= start:
                lo = mid
            else:
                hi = mid - 1
        return SourceSpan(start, end, lo + 1, start - self.starts[lo] + 1)


def tokenize(src: str) -> list[Token]:
    pos = _Positions(src)
    tokens: list[Token] = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ParseError(
                [
                    Diagnostic(
                        pos.span(i, i + 1),
                        "error",
                        "PARSE_BAD_CHAR",
                        f"unexpected character {src[i]!r}",
                    )
                ]
            )
        kind = m.lastgroup
        assert kind is not None
        if kind != "ws":
            text = m.group()
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, text, pos.span(m.start(), m.end())))
        i = m.end()
    tokens.append(Token("eof", "", pos.span(len(src), len(src))))
    return tokens


# --------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = _Positions(src)
        self.tokens = tokenize(src)
        self.i = 0
        self.open_brackets: list[Token] = []

    # token helpers

    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in ("sym", "kw") and tok.text == text

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.i += 1
        return tok

    def fail(self, expected: str) -> ParseError:
        tok = self.peek()
        if tok.kind == "eof" and self.open_brackets:
            opener = self.open_brackets[-1]
            return ParseError(
                [
                    Diagnostic(
                        tok.span,
                        "error",
                        "PARSE_UNTERMINATED",
                        f"input ends inside {opener.text!r} opened at "
                        f"{opener.span.line}:{opener.span.column}; expected {expected}",
                    )
                ]
            )
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(
            [
                Diagnostic(
                    tok.span,
                    "error",
                    "PARSE_UNEXPECTED_TOKEN",
                    f"expected {expected}, found {found}",
                )
            ]
        )

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.fail(repr(text))
        return self.advance()

    def expect_ident(self) -> Token:
        if self.peek().kind != "ident":
            raise self.fail("an identifier")
        return self.advance()

    def open(self, text: str) -> None:
        self.open_brackets.append(self.expect(text))

    def close(self, text: str) -> None:
        self.expect(text)
        self.open_brackets.pop()

    def span_from(self, start: Token) -> SourceSpan:
        prev = self.tokens[max(self.i - 1, 0)]
        return self.pos.span(start.span.start_offset, max(prev.span.end_offset, start.span.start_offset))

    # grammar

    def term(self) -> Term:
        start = self.peek()
        first = self.stmt()
        if self.at(";"):
            self.advance()
            second = self.term()
            return Seq(first, second, self.span_from(start))
        return first

    def braced(self) -> Term:
        self.open("{")
        t = self.term()
        self.close("}")
        return t

    def stmt(self) -> Term:
        start = self.peek()
        if self.at("letrec"):
            self.advance()
            f = self.expect_ident().text
            self.open("(")
            params: list[str] = []
            if not self.at(")"):
                params.append(self.expect_ident().text)
                while self.at(","):
                    self.advance()
                    params.append(self.expect_ident().text)
            self.close(")")
            self.expect("=")
            body = self.braced()
            self.expect("in")
            cont = self.term()
            if len(set(params)) != len(params):
                raise ParseError(
                    [
                        Diagnostic(
                            self.span_from(start),
                            "error",
                            "UNIQ_PARAM",
                            f"duplicate parameter in {f}({', '.join(params)})",
                        )
                    ]
                )
            return LetRec(f, tuple(params), body, cont, self.span_from(start))
        if self.at("if"):
            self.advance()
            cond = self.term()
            self.expect("then")
            then = self.braced()
            self.expect("else")
            else_ = self.braced()
            return If(cond, then, else_, self.span_from(start))
        if self.at("{"):
            return self.braced()
        if start.kind == "ident" and self.peek(1).kind == "sym":
            nxt = self.peek(1).text
            if nxt == ":=":
                self.advance()
                self.advance()
                rhs = self.stmt()
                return Assign(start.text, rhs, self.span_from(start))
            if nxt == "(":
                self.advance()
                self.open("(")
                args: list[Term] = []
                if not self.at(")"):
                    args.append(self.term())
                    while self.at(","):
                        self.advance()
                        args.append(self.term())
                self.close(")")
                return Call(start.text, tuple(args), self.span_from(start))
        e = self.expr()
        return E(e, self.span_from(start))

    def expr(self) -> Expr:
        left = self.sum()
        if self.peek().kind == "sym" and self.peek().text in ("<", "=="):
            op = BINOP_OF_SYMBOL[self.advance().text]
            right = self.sum()
            return BinOp(op, left, right)
        return left

    def sum(self) -> Expr:
        left = self.atom()
        while self.peek().kind == "sym" and self.peek().text in ("+", "-"):
            op = BINOP_OF_SYMBOL[self.advance().text]
            left = BinOp(op, left, self.atom())
        return left

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return Lit(Int(int(tok.text)))
        if tok.kind == "sym" and tok.text == "-" and self.peek(1).kind == "int":
            self.advance()
            return Lit(Int(-int(self.advance().text)))
        if tok.kind == "kw" and tok.text in ("true", "false", "unit"):
            self.advance()
            return Lit({"true": TRUE, "false": FALSE, "unit": UNIT}[tok.text])
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text)
        if tok.kind == "sym" and tok.text == "(":
            self.open("(")
            e = self.expr()
            self.close(")")
            return e
        raise self.fail("an expression")


def parse_term(src: str) -> Term:
    """Parse ``src`` into a term.  Raises :class:`ParseError` on failure."""
    p = _Parser(src)
    t = p.term()
    if p.peek().kind != "eof":
        raise p.fail("';' or end of input")
    return t


def parse_expr(src: str) -> Expr:
    p = _Parser(src)
    e = p.expr()
    if p.peek().kind != "eof":
        raise p.fail("end of input")
    return e


# --------------------------------------------------------------------------
# Validation


def _span(t: Term) -> SourceSpan:
    return t.span if isinstance(t.span, SourceSpan) else NO_SPAN


def validate(t: Term, shadow_ok: Collection[str] = ()) -> list[Diagnostic]:
    """Scope and uniqueness diagnostics for a whole program.

    The result is empty iff ``t`` is closed and every parameter name is bound
    once in the whole program.  Names in ``shadow_ok`` may be bound more than
    once; lifted terms need this for the parameters that were lifted.
    """
    out: list[Diagnostic] = []
    seen: set[str] = set()

    def go(u: Term, vars_: frozenset[str], funs: frozenset[str]) -> None:
        if isinstance(u, E):
            for x in sorted(expr_vars(u.e) - vars_):
                out.append(
                    Diagnostic(_span(u), "error", "SCOPE_UNBOUND_VAR", f"unbound variable {x}")
                )
            return
        if isinstance(u, Assign):
            if u.x not in vars_:
                out.append(
                    Diagnostic(
                        _span(u), "error", "SCOPE_UNBOUND_VAR", f"assignment to unbound variable {u.x}"
                    )
                )
            go(u.rhs, vars_, funs)
            return
        if isinstance(u, LetRec):
            for x in u.params:
                if x in seen and x not in shadow_ok:
                    out.append(
                        Diagnostic(_span(u), "error", "UNIQ_PARAM", f"parameter {x} is bound more than once")
                    )
                seen.add(x)
            inner = funs | {u.f}
            go(u.body, vars_ | set(u.params), inner)
            go(u.cont, vars_, inner)
            return
        if isinstance(u, Call) and u.f not in funs:
            out.append(Diagnostic(_span(u), "error", "SCOPE_UNBOUND_FUN", f"unbound function {u.f}"))
        for c in children(u):
            go(c, vars_, funs)

    go(t, frozenset(), frozenset())
    return out
