"""Abstract syntax of the mini imperative language.

Values, pure expressions and terms are immutable dataclasses.  Terms built by
the parser carry a ``span`` that takes no part in equality, so a parsed term
compares equal to the same term built by hand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Union

# --------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class Unit:
    def __str__(self) -> str:
        return "unit"


@dataclass(frozen=True)
class Bool:
    truth: bool

    def __str__(self) -> str:
        return "true" if self.truth else "false"


@dataclass(frozen=True)
class Int:
    n: int

    def __str__(self) -> str:
        return str(self.n)


Value = Union[Unit, Bool, Int]

UNIT = Unit()
TRUE = Bool(True)
FALSE = Bool(False)

# --------------------------------------------------------------------------
# Expressions

BINOPS = {"add": "+", "sub": "-", "lt": "<", "eq": "=="}
BINOP_OF_SYMBOL = {sym: name for name, sym in BINOPS.items()}


@dataclass(frozen=True)
class Lit:
    v: Value


@dataclass(frozen=True)
class Var:
    x: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr

    def __post_init__(self) -> None:
        if self.op not in BINOPS:
            raise ValueError(f"unknown operator {self.op!r}")


Expr = Union[Lit, Var, BinOp]

# --------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class E:
    e: Expr
    span: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Assign:
    x: str
    rhs: Term
    span: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Term
    then: Term
    else_: Term
    span: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    first: Term
    second: Term
    span: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LetRec:
    f: str
    params: tuple[str, ...]
    body: Term
    cont: Term
    span: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if len(set(self.params)) != len(self.params):
            raise ValueError(f"duplicate parameters in {self.f}{self.params}")


@dataclass(frozen=True)
class Call:
    f: str
    args: tuple[Term, ...]
    span: Any = field(default=None, compare=False, repr=False)


Term = Union[E, Assign, If, Seq, LetRec, Call]


def lit(v: int | bool | None) -> E:
    """Shorthand: ``lit(3)``, ``lit(True)``, ``lit(None)`` for unit."""
    if v is None:
        return E(Lit(UNIT))
    if isinstance(v, bool):
        return E(Lit(Bool(v)))
    return E(Lit(Int(v)))


def var(x: str) -> E:
    return E(Var(x))


def seq(*ts: Term) -> Term:
    """Right-nested sequence ``t1; (t2; (...))``."""
    if not ts:
        raise ValueError("seq() needs at least one term")
    out = ts[-1]
    for t in reversed(ts[:-1]):
        out = Seq(t, out)
    return out


def children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, E):
        return ()
    if isinstance(t, Assign):
        return (t.rhs,)
    if isinstance(t, If):
        return (t.cond, t.then, t.else_)
    if isinstance(t, Seq):
        return (t.first, t.second)
    if isinstance(t, LetRec):
        return (t.body, t.cont)
    if isinstance(t, Call):
        return t.args
    raise TypeError(f"not a term: {t!r}")


def subterms(t: Term) -> Iterator[Term]:
    """Pre-order traversal of every subterm, ``t`` included."""
    stack = [t]
    while stack:
        u = stack.pop()
        yield u
        stack.extend(reversed(children(u)))


def size(t: Term) -> int:
    return sum(1 for _ in subterms(t))


# --------------------------------------------------------------------------
# Pretty printing

_PREC_CMP = 1
_PREC_ADD = 2
_PREC_ATOM = 3


def _expr_prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC_CMP if e.op in ("lt", "eq") else _PREC_ADD
    return _PREC_ATOM


def pretty_expr(e: Expr) -> str:
    if isinstance(e, Lit):
        return str(e.v)
    if isinstance(e, Var):
        return e.x
    p = _expr_prec(e)
    left = pretty_expr(e.left)
    right = pretty_expr(e.right)
    # additive ops are left-associative, comparisons do not chain
    if _expr_prec(e.left) < p or (p == _PREC_CMP and _expr_prec(e.left) == p):
        left = f"({left})"
    if _expr_prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {BINOPS[e.op]} {right}"


def _open_ended(t: Term) -> bool:
    # True when a trailing "; ..." would be swallowed by t itself.
    if isinstance(t, (Seq, LetRec)):
        return True
    if isinstance(t, Assign):
        return _open_ended(t.rhs)
    return False


def pretty_print(t: Term) -> str:
    """Concrete syntax accepted by :func:`contpass.parser.parse_term`."""
    if isinstance(t, E):
        return pretty_expr(t.e)
    if isinstance(t, Assign):
        rhs = pretty_print(t.rhs)
        if isinstance(t.rhs, Seq):
            rhs = f"{{ {rhs} }}"
        return f"{t.x} := {rhs}"
    if isinstance(t, If):
        return (
            f"if {pretty_print(t.cond)} then {{ {pretty_print(t.then)} }}"
            f" else {{ {pretty_print(t.else_)} }}"
        )
    if isinstance(t, Seq):
        first = pretty_print(t.first)
        if _open_ended(t.first):
            first = f"{{ {first} }}"
        return f"{first}; {pretty_print(t.second)}"
    if isinstance(t, LetRec):
        return (
            f"letrec {t.f}({', '.join(t.params)}) = {{ {pretty_print(t.body)} }}"
            f" in {pretty_print(t.cont)}"
        )
    if isinstance(t, Call):
        return f"{t.f}({', '.join(pretty_print(a) for a in t.args)})"
    raise TypeError(f"not a term: {t!r}")


# --------------------------------------------------------------------------
# Variables


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.x}
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    return set()


def free_vars(t: Term) -> frozenset[str]:
    """Variables read or assigned in ``t`` and not bound by a parameter list
    inside ``t``.  Function names are never variables."""
    if isinstance(t, E):
        return frozenset(expr_vars(t.e))
    if isinstance(t, Assign):
        return free_vars(t.rhs) | {t.x}
    if isinstance(t, LetRec):
        return (free_vars(t.body) - set(t.params)) | free_vars(t.cont)
    out: frozenset[str] = frozenset()
    for c in children(t):
        out |= free_vars(c)
    return out


def subst_expr(e: Expr, binding: Mapping[str, Value]) -> Expr:
    if isinstance(e, Var):
        return Lit(binding[e.x]) if e.x in binding else e
    if isinstance(e, BinOp):
        return BinOp(e.op, subst_expr(e.left, binding), subst_expr(e.right, binding))
    return e


def subst_values(t: Term, binding: Mapping[str, Value]) -> Term:
    """Replace free occurrences of mapped variables by literals.

    Raises ValueError if a mapped variable is the target of a free
    assignment: a literal cannot stand on the left of ``:=``.
    """
    if not binding:
        return t
    if isinstance(t, E):
        return E(subst_expr(t.e, binding), t.span)
    if isinstance(t, Assign):
        if t.x in binding:
            raise ValueError(f"cannot substitute assigned variable {t.x!r}")
        return Assign(t.x, subst_values(t.rhs, binding), t.span)
    if isinstance(t, If):
        return If(
            subst_values(t.cond, binding),
            subst_values(t.then, binding),
            subst_values(t.else_, binding),
            t.span,
        )
    if isinstance(t, Seq):
        return Seq(subst_values(t.first, binding), subst_values(t.second, binding), t.span)
    if isinstance(t, LetRec):
        inner = {x: v for x, v in binding.items() if x not in t.params}
        return LetRec(
            t.f, t.params, subst_values(t.body, inner), subst_values(t.cont, binding), t.span
        )
    if isinstance(t, Call):
        return Call(t.f, tuple(subst_values(a, binding) for a in t.args), t.span)
    raise TypeError(f"not a term: {t!r}")


def running_example() -> Term:
    """``letrec g(x) = { letrec h() = { x } in h() } in g(1)``"""
    return LetRec(
        "g", ("x",), LetRec("h", (), var("x"), Call("h", ())), Call("g", (lit(1),))
    )


def running_example_lifted() -> Term:
    """The example with ``x`` lifted into ``h`` (same name, shadowing)."""
    return LetRec(
        "g",
        ("x",),
        LetRec("h", ("x",), var("x"), Call("h", (var("x"),))),
        Call("g", (lit(1),)),
    )
