"""CPS-convertible programs, CPS terms and the conversions between them.

Convertible terms::

    T ::= expr | x := expr; T | if expr then T else T | Q
    Q ::= eps | Q; F
    F ::= f(expr, ..., expr) | f(expr, ..., expr, F)

A tail ``Q`` is stored as the tuple of its calls, leftmost first; the
leftmost call runs first.  CPS terms replace tails by ``push``/``invoke``
sequences.  Frame tuples of contexts and continuations are stored
innermost (head) first, so converting between the two keeps the frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .lifting import FunDef, Program
from .parser import NO_SPAN, Diagnostic, ParseError, SourceSpan, _Parser
from .terms import (
    Assign,
    Call,
    E,
    Expr,
    If,
    LetRec,
    Seq,
    Term,
    Value,
    pretty_expr,
    pretty_print,
    seq,
)

# --------------------------------------------------------------------------
# Convertible terms


@dataclass(frozen=True)
class NestedCall:
    f: str
    args: tuple[Expr, ...]
    nested: Optional[NestedCall] = None

    def arity(self) -> int:
        return len(self.args) + (self.nested is not None)


@dataclass(frozen=True)
class ExprLeaf:
    e: Expr


@dataclass(frozen=True)
class AssignThen:
    x: str
    e: Expr
    rest: ConvTerm


@dataclass(frozen=True)
class IfConv:
    cond: Expr
    then: ConvTerm
    else_: ConvTerm


@dataclass(frozen=True)
class Tail:
    calls: tuple[NestedCall, ...] = ()

    def then(self, call: NestedCall) -> Tail:
        return Tail(self.calls + (call,))


EPSILON = Tail()

ConvTerm = Union[ExprLeaf, AssignThen, IfConv, Tail]


@dataclass(frozen=True)
class ConvProgram:
    functions: tuple[FunDef, ...]
    main: ConvTerm

    def lookup(self, f: str) -> Optional[FunDef]:
        for d in self.functions:
            if d.name == f:
                return d
        return None


# --------------------------------------------------------------------------
# CPS terms


@dataclass(frozen=True)
class Invoke:
    pass


@dataclass(frozen=True)
class PushThen:
    f: str
    args: tuple[Expr, ...]
    hole: bool
    rest: CpsTail


@dataclass(frozen=True)
class InvokeExpr:
    e: Expr


@dataclass(frozen=True)
class CpsAssign:
    x: str
    e: Expr
    rest: CpsTerm


@dataclass(frozen=True)
class CpsIf:
    cond: Expr
    then: CpsTerm
    else_: CpsTerm


INVOKE = Invoke()

CpsTail = Union[Invoke, PushThen]
CpsTerm = Union[InvokeExpr, CpsAssign, CpsIf, Invoke, PushThen]


@dataclass(frozen=True)
class CpsProgram:
    functions: tuple[FunDef, ...]
    main: CpsTerm

    def lookup(self, f: str) -> Optional[FunDef]:
        for d in self.functions:
            if d.name == f:
                return d
        return None


class NotWellFormed(ValueError):
    code = "NOT_WELL_FORMED"


# --------------------------------------------------------------------------
# Conversions


def convert_tail(q: Tail) -> CpsTail:
    out: CpsTail = INVOKE
    calls = list(q.calls)
    # Unfold from the right: the last call of Q is pushed first.
    pushes: list[tuple[str, tuple[Expr, ...], bool]] = []
    while calls:
        last = calls.pop()
        pushes.append((last.f, last.args, last.nested is not None))
        if last.nested is not None:
            calls.append(last.nested)
    for f, args, hole in reversed(pushes):
        out = PushThen(f, args, hole, out)
    return out


def cps_convert(t: ConvTerm) -> CpsTerm:
    if isinstance(t, ExprLeaf):
        return InvokeExpr(t.e)
    if isinstance(t, AssignThen):
        return CpsAssign(t.x, t.e, cps_convert(t.rest))
    if isinstance(t, IfConv):
        return CpsIf(t.cond, cps_convert(t.then), cps_convert(t.else_))
    if isinstance(t, Tail):
        return convert_tail(t)
    raise TypeError(f"not a convertible term: {t!r}")


def invert_tail(q: CpsTail) -> Tail:
    pushes = []
    while isinstance(q, PushThen):
        pushes.append(q)
        q = q.rest
    if not isinstance(q, Invoke):
        raise TypeError(f"not a CPS tail: {q!r}")
    calls: list[NestedCall] = []
    for p in reversed(pushes):
        if p.hole:
            if not calls:
                raise NotWellFormed(f"push {p.f}(..., _) is directly followed by invoke")
            calls.append(NestedCall(p.f, p.args, calls.pop()))
        else:
            calls.append(NestedCall(p.f, p.args))
    return Tail(tuple(calls))


def cps_invert(t: CpsTerm) -> ConvTerm:
    """Inverse of :func:`cps_convert` on well-formed terms.

    Raises NotWellFormed when a hole push has nothing to nest.
    """
    if isinstance(t, InvokeExpr):
        return ExprLeaf(t.e)
    if isinstance(t, CpsAssign):
        return AssignThen(t.x, t.e, cps_invert(t.rest))
    if isinstance(t, CpsIf):
        return IfConv(t.cond, cps_invert(t.then), cps_invert(t.else_))
    if isinstance(t, (Invoke, PushThen)):
        return invert_tail(t)
    raise TypeError(f"not a CPS term: {t!r}")


def _queue_well_formed(q: CpsTail) -> bool:
    while isinstance(q, PushThen):
        if q.hole and isinstance(q.rest, Invoke):
            return False
        q = q.rest
    return True


def is_well_formed(t: CpsTerm) -> bool:
    if isinstance(t, InvokeExpr):
        return True
    if isinstance(t, CpsAssign):
        return is_well_formed(t.rest)
    if isinstance(t, CpsIf):
        return is_well_formed(t.then) and is_well_formed(t.else_)
    return _queue_well_formed(t)


def convert_program(p: ConvProgram) -> CpsProgram:
    return CpsProgram(
        tuple(FunDef(d.name, d.params, cps_convert(d.body)) for d in p.functions),
        cps_convert(p.main),
    )


def invert_program(p: CpsProgram) -> ConvProgram:
    return ConvProgram(
        tuple(FunDef(d.name, d.params, cps_invert(d.body)) for d in p.functions),
        cps_invert(p.main),
    )


def program_well_formed(p: CpsProgram) -> bool:
    return is_well_formed(p.main) and all(is_well_formed(d.body) for d in p.functions)


# --------------------------------------------------------------------------
# Contexts and continuations


@dataclass(frozen=True)
class Frame:
    f: str
    args: tuple[Value, ...]
    hole: bool = False

    def describe(self) -> str:
        shown = [str(v) for v in self.args] + (["_"] if self.hole else [])
        return f"{self.f}({', '.join(shown)})"

    def to_json(self) -> dict:
        return {"f": self.f, "args": [str(v) for v in self.args], "hole": self.hole}


@dataclass(frozen=True)
class Context:
    frames: tuple[Frame, ...] = ()


@dataclass(frozen=True)
class Continuation:
    frames: tuple[Frame, ...] = ()


def convert_context(c: Context) -> Continuation:
    return Continuation(c.frames)


def invert_continuation(k: Continuation) -> Context:
    return Context(k.frames)


# --------------------------------------------------------------------------
# Recognising convertible bodies


class ConversionError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(d.render() for d in diagnostics))
        self.diagnostics = diagnostics


def _span(t: Term) -> SourceSpan:
    return t.span if isinstance(t.span, SourceSpan) else NO_SPAN


def _has_call(t: Term) -> bool:
    if isinstance(t, Call):
        return True
    if isinstance(t, E):
        return False
    if isinstance(t, Assign):
        return _has_call(t.rhs)
    if isinstance(t, If):
        return any(_has_call(u) for u in (t.cond, t.then, t.else_))
    if isinstance(t, Seq):
        return _has_call(t.first) or _has_call(t.second)
    if isinstance(t, LetRec):
        return _has_call(t.body) or _has_call(t.cont)
    return False


def _flatten(t: Term) -> list[Term]:
    if isinstance(t, Seq):
        return _flatten(t.first) + _flatten(t.second)
    return [t]


class _Recognizer:
    def __init__(self, where: str):
        self.where = where
        self.diagnostics: list[Diagnostic] = []

    def report(self, t: Term, code: str, message: str) -> None:
        self.diagnostics.append(Diagnostic(_span(t), "error", code, f"{self.where}: {message}"))

    def expr_of(self, t: Term, what: str) -> Optional[Expr]:
        if isinstance(t, E):
            return t.e
        if _has_call(t):
            self.report(t, "CONV_CALL_IN_EXPR", f"{what} contains a call")
        else:
            self.report(t, "CONV_SHAPE", f"{what} must be an expression")
        return None

    def nested(self, c: Call) -> Optional[NestedCall]:
        args: list[Expr] = []
        inner: Optional[NestedCall] = None
        ok = True
        for i, a in enumerate(c.args):
            last = i == len(c.args) - 1
            if isinstance(a, Call):
                if not last:
                    self.report(a, "CONV_NESTED_NOT_LAST",
                                f"nested call {a.f}(...) is not the last argument of {c.f}")
                    ok = False
                    continue
                inner = self.nested(a)
                ok = ok and inner is not None
                continue
            e = self.expr_of(a, f"argument {i + 1} of {c.f}")
            if e is None:
                ok = False
            else:
                args.append(e)
        return NestedCall(c.f, tuple(args), inner) if ok else None

    def term(self, t: Term) -> Optional[ConvTerm]:
        return self.items(_flatten(t))

    def items(self, items: list[Term]) -> Optional[ConvTerm]:
        head, rest = items[0], items[1:]
        if isinstance(head, Call):
            if not all(isinstance(u, Call) for u in items):
                self.report(head, "CONV_CALL_IN_EXPR", f"call {head.f}(...) is followed by a non-call")
                return None
            calls = [self.nested(u) for u in items]
            if any(c is None for c in calls):
                return None
            return Tail(tuple(calls))
        if isinstance(head, Assign):
            e = self.expr_of(head.rhs, f"right-hand side of {head.x} :=")
            if not rest:
                self.report(head, "CONV_SHAPE", "an assignment cannot end a body")
                return None
            after = self.items(rest)
            return AssignThen(head.x, e, after) if e is not None and after is not None else None
        if rest:
            code = "CONV_CALL_IN_EXPR" if _has_call(head) and not isinstance(head, LetRec) else "CONV_SHAPE"
            self.report(head, code, "only assignments may precede the rest of a body")
            return None
        if isinstance(head, E):
            return ExprLeaf(head.e)
        if isinstance(head, If):
            c = self.expr_of(head.cond, "condition")
            a = self.term(head.then)
            b = self.term(head.else_)
            return IfConv(c, a, b) if c is not None and a is not None and b is not None else None
        self.report(head, "CONV_SHAPE", "nested function definitions must be floated first")
        return None


def classify_body(t: Term, where: str = "main") -> tuple[Optional[ConvTerm], list[Diagnostic]]:
    r = _Recognizer(where)
    out = r.term(t)
    return (out if not r.diagnostics else None), r.diagnostics


def to_convertible(p: Program) -> ConvProgram:
    """Recognise a floated program as a convertible one.

    Raises ConversionError with one diagnostic per offending site.
    """
    diagnostics: list[Diagnostic] = []
    funs = []
    for d in p.functions:
        body, diags = classify_body(d.body, d.name)
        diagnostics.extend(diags)
        funs.append(FunDef(d.name, d.params, body))
    main, diags = classify_body(p.main, "main")
    diagnostics.extend(diags)
    if diagnostics:
        raise ConversionError(diagnostics)
    return ConvProgram(tuple(funs), main)


# --------------------------------------------------------------------------
# Back to plain terms


def nested_to_term(c: NestedCall) -> Call:
    args: tuple[Term, ...] = tuple(E(e) for e in c.args)
    if c.nested is not None:
        args += (nested_to_term(c.nested),)
    return Call(c.f, args)


def conv_to_term(t: ConvTerm) -> Term:
    if isinstance(t, ExprLeaf):
        return E(t.e)
    if isinstance(t, AssignThen):
        return Seq(Assign(t.x, E(t.e)), conv_to_term(t.rest))
    if isinstance(t, IfConv):
        return If(E(t.cond), conv_to_term(t.then), conv_to_term(t.else_))
    if isinstance(t, Tail):
        if not t.calls:
            raise ValueError("the empty tail has no term form")
        return seq(*(nested_to_term(c) for c in t.calls))
    raise TypeError(f"not a convertible term: {t!r}")


def unfloat(p: ConvProgram) -> Term:
    """Nest the functions as ``letrec f0 in letrec f1 in ... main``.

    Each function sees itself and the ones listed before it.
    """
    out = conv_to_term(p.main)
    for d in reversed(p.functions):
        out = LetRec(d.name, d.params, conv_to_term(d.body), out)
    return out


def to_program(p: ConvProgram) -> Program:
    return Program(
        tuple(FunDef(d.name, d.params, conv_to_term(d.body)) for d in p.functions),
        conv_to_term(p.main),
    )


# --------------------------------------------------------------------------
# Concrete syntax


def _args(args: tuple[Expr, ...], hole: bool) -> str:
    shown = [pretty_expr(e) for e in args] + (["_"] if hole else [])
    return ", ".join(shown)


def pretty_cps(t: CpsTerm) -> str:
    if isinstance(t, InvokeExpr):
        return f"invoke {pretty_expr(t.e)}"
    if isinstance(t, CpsAssign):
        return f"{t.x} := {pretty_expr(t.e)}; {pretty_cps(t.rest)}"
    if isinstance(t, CpsIf):
        return (
            f"if {pretty_expr(t.cond)} then {{ {pretty_cps(t.then)} }}"
            f" else {{ {pretty_cps(t.else_)} }}"
        )
    if isinstance(t, Invoke):
        return "invoke"
    if isinstance(t, PushThen):
        return f"push {t.f}({_args(t.args, t.hole)}); {pretty_cps(t.rest)}"
    raise TypeError(f"not a CPS term: {t!r}")


def _pretty_program(functions, main, body) -> str:
    lines = [f"{d.name}({', '.join(d.params)}) = {{ {body(d.body)} }}" for d in functions]
    lines.append(f"main = {{ {body(main)} }}")
    return "\n".join(lines) + "\n"


def pretty_cps_program(p: CpsProgram) -> str:
    return _pretty_program(p.functions, p.main, pretty_cps)


def pretty_conv_program(p: ConvProgram) -> str:
    return _pretty_program(p.functions, p.main, lambda t: pretty_print(conv_to_term(t)))


class _CpsParser(_Parser):
    def is_word(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and tok.text == word

    def cps(self) -> CpsTerm:
        if self.is_word("invoke"):
            self.advance()
            if self.at(";") or self.at("}") or self.peek().kind == "eof":
                return INVOKE
            return InvokeExpr(self.expr())
        if self.is_word("push"):
            self.advance()
            f = self.expect_ident().text
            self.open("(")
            args: list[Expr] = []
            hole = False
            while not self.at(")"):
                if self.is_word("_"):
                    self.advance()
                    hole = True
                    break
                args.append(self.expr())
                if not self.at(","):
                    break
                self.advance()
            self.close(")")
            self.expect(";")
            rest = self.cps()
            if not isinstance(rest, (Invoke, PushThen)):
                raise self.fail("push or invoke")
            return PushThen(f, tuple(args), hole, rest)
        if self.at("if"):
            self.advance()
            c = self.expr()
            self.expect("then")
            self.open("{")
            a = self.cps()
            self.close("}")
            self.expect("else")
            self.open("{")
            b = self.cps()
            self.close("}")
            return CpsIf(c, a, b)
        if self.peek().kind == "ident" and self.peek(1).text == ":=":
            x = self.advance().text
            self.advance()
            e = self.expr()
            self.expect(";")
            return CpsAssign(x, e, self.cps())
        raise self.fail("invoke, push, if or an assignment")

    def program(self) -> CpsProgram:
        funs = []
        main = None
        while self.peek().kind != "eof":
            name = self.expect_ident().text
            params: list[str] = []
            if name != "main" or self.at("("):
                self.open("(")
                while not self.at(")"):
                    params.append(self.expect_ident().text)
                    if not self.at(","):
                        break
                    self.advance()
                self.close(")")
            self.expect("=")
            self.open("{")
            body = self.cps()
            self.close("}")
            if name == "main" and not params:
                main = body
            else:
                funs.append(FunDef(name, tuple(params), body))
        if main is None:
            raise self.fail("a main definition")
        return CpsProgram(tuple(funs), main)


def parse_cps(src: str) -> CpsTerm:
    p = _CpsParser(src)
    t = p.cps()
    if p.peek().kind != "eof":
        raise p.fail("end of input")
    return t


def parse_cps_program(src: str) -> CpsProgram:
    """Parse lines ``f(x, y) = { ... }`` followed by ``main = { ... }``.

    Raises :class:`contpass.parser.ParseError`.
    """
    return _CpsParser(src).program()


__all__ = [
    "AssignThen", "ConvProgram", "ConvTerm", "ConversionError", "Context", "Continuation",
    "CpsAssign", "CpsIf", "CpsProgram", "CpsTail", "CpsTerm", "EPSILON", "ExprLeaf", "Frame",
    "INVOKE", "IfConv", "Invoke", "InvokeExpr", "NestedCall", "NotWellFormed", "ParseError",
    "PushThen", "Tail", "classify_body", "conv_to_term", "convert_context", "convert_program",
    "convert_tail", "cps_convert", "cps_invert", "invert_continuation", "invert_program",
    "invert_tail", "is_well_formed", "nested_to_term", "parse_cps", "parse_cps_program",
    "pretty_conv_program", "pretty_cps", "pretty_cps_program", "program_well_formed",
    "to_convertible", "to_program", "unfloat",
]
