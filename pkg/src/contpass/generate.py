"""Seeded random programs for differential testing.

All randomness comes from :class:`SplitMix64`, a 64-bit generator small
enough to port exactly: the state advances by the constant
``0x9E3779B97F4A7C15`` and each output is the state passed through two
xor-shift-multiply rounds.  Bounded draws use ``next_u64() % n``.

Programs are typed (int, bool, unit) so that evaluation never hits a type
error, and they always terminate: a function may only call functions whose
body is already complete, and the only recursion is a countdown on a
read-only integer counter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional, Sequence, TypeVar

from .cps import AssignThen, ConvProgram, ConvTerm, ExprLeaf, IfConv, NestedCall, Tail, unfloat
from .lifting import FunDef
from .terms import (
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
)

MASK64 = (1 << 64) - 1
MODES = ("general", "liftable", "convertible")
TYPES = ("int", "bool", "unit")

T = TypeVar("T")


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        return self.next_u64() % n

    def between(self, lo: int, hi: int) -> int:
        """Uniform-ish integer in ``[lo, hi]``."""
        return lo + self.below(hi - lo + 1)

    def chance(self, num: int, den: int) -> bool:
        return self.below(den) < num

    def choice(self, items: Sequence[T]) -> T:
        return items[self.below(len(items))]


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_depth: int = 4
    max_funs: int = 3
    max_arity: int = 2
    mode: str = "general"
    int_range: tuple[int, int] = (-3, 8)

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.max_arity < 0 or self.max_funs < 0:
            raise ValueError("max_arity and max_funs must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.int_range[0] > self.int_range[1]:
            raise ValueError("empty int_range")


def sample_seeds(seed: int, count: int) -> list[int]:
    """Per-sample seeds: the first ``count`` outputs of SplitMix64(seed)."""
    rng = SplitMix64(seed)
    return [rng.next_u64() for _ in range(count)]


@dataclass(frozen=True)
class Sig:
    name: str
    params: tuple[str, ...]
    types: tuple[str, ...]
    ret: str
    inner: bool = False
    counter: bool = False  # first parameter is a read-only countdown


@dataclass(frozen=True)
class _Scope:
    vars: tuple[tuple[str, str, bool], ...] = ()  # name, type, assignable
    funs: tuple[Sig, ...] = ()
    in_body: bool = False

    def of_type(self, ty: str) -> list[str]:
        return [x for x, t, _ in self.vars if t == ty]

    def assignable(self) -> list[tuple[str, str]]:
        return [(x, t) for x, t, ok in self.vars if ok]


class _Gen:
    def __init__(self, cfg: GenConfig):
        self.cfg = cfg
        self.rng = SplitMix64(cfg.seed)
        self.n_params = 0
        self.n_funs = 0
        self.liftable = cfg.mode == "liftable"

    def fresh_param(self) -> str:
        self.n_params += 1
        return f"p{self.n_params - 1}"

    def fresh_fun(self) -> str:
        self.n_funs += 1
        return f"f{self.n_funs - 1}"

    def new_sig(self, inner: bool, ret: Optional[str] = None) -> Sig:
        rng = self.rng
        if ret is None or rng.chance(1, 3):
            ret = rng.choice(TYPES)
        arity = rng.between(0, self.cfg.max_arity)
        counter = arity >= 1 and rng.chance(1, 3)
        types = tuple(rng.choice(TYPES) for _ in range(arity))
        if counter:
            types = ("int",) + types[1:]
        params = tuple(self.fresh_param() for _ in range(arity))
        return Sig(self.fresh_fun(), params, types, ret, inner, counter)

    # expressions

    def lit(self, ty: str) -> Lit:
        if ty == "int":
            return Lit(Int(self.rng.between(*self.cfg.int_range)))
        if ty == "bool":
            return Lit(self.rng.choice((TRUE, FALSE)))
        return Lit(UNIT)

    def expr(self, ty: str, depth: int, names: _Scope) -> Expr:
        rng = self.rng
        options = ["lit"]
        if names.of_type(ty):
            options += ["var", "var"]
        if depth > 0 and ty in ("int", "bool"):
            options += ["op", "op"]
        pick = rng.choice(options)
        if pick == "lit":
            return self.lit(ty)
        if pick == "var":
            return Var(rng.choice(names.of_type(ty)))
        if ty == "int":
            op = rng.choice(("add", "sub"))
        else:
            op = rng.choice(("lt", "eq"))
        return BinOp(op, self.expr("int", depth - 1, names), self.expr("int", depth - 1, names))

    # terms for the general and liftable modes

    def callable(self, ty: Optional[str], scope: _Scope, tail: bool) -> list[Sig]:
        out = [s for s in scope.funs if ty is None or s.ret == ty]
        if self.liftable and not tail:
            out = [s for s in out if not s.inner]
        return out

    def term(self, ty: str, depth: int, scope: _Scope, tail: bool) -> Term:
        rng = self.rng
        if depth <= 0:
            return E(self.expr(ty, 1, scope))
        options = ["expr", "expr", "seq", "if"]
        if self.n_funs < self.cfg.max_funs:
            options += ["letrec"] * 3
        if ty == "unit" and scope.assignable():
            options += ["assign"] * 3
        if self.callable(ty, scope, tail):
            options += ["call"] * 5
        pick = rng.choice(options)
        d = depth - 1
        if pick == "expr":
            return E(self.expr(ty, 2, scope))
        if pick == "seq":
            return Seq(self.term(rng.choice(TYPES), d, scope, False), self.term(ty, d, scope, tail))
        if pick == "if":
            if rng.chance(1, 3):
                cond = self.term("bool", d, scope, False)
            else:
                cond = E(self.expr("bool", 2, scope))
            return If(
                cond,
                self.term(ty, d, scope, tail),
                self.term(ty, d, scope, tail),
            )
        if pick == "assign":
            x, xty = rng.choice(scope.assignable())
            return Assign(x, self.term(xty, d, scope, False))
        if pick == "call":
            return self.call(rng.choice(self.callable(ty, scope, tail)), d, scope)
        return self.letrec(ty, d, scope, tail)

    def call(self, sig: Sig, depth: int, scope: _Scope) -> Call:
        return Call(sig.name, tuple(self.term(t, depth, scope, False) for t in sig.types))

    def letrec(self, ty: str, depth: int, scope: _Scope, tail: bool) -> LetRec:
        sig = self.new_sig(scope.in_body, ty)
        own = tuple(
            (x, t, not (sig.counter and i == 0)) for i, (x, t) in enumerate(zip(sig.params, sig.types))
        )
        inside = _Scope(scope.vars + own, scope.funs, True)
        if sig.counter:
            body = self.countdown(sig, depth, inside)
        else:
            body = self.term(sig.ret, depth, inside, True)
        after = _Scope(scope.vars, scope.funs + (sig,), scope.in_body)
        usable = sig.ret == ty and (tail or not (self.liftable and sig.inner))
        if usable and self.rng.chance(2, 3):
            # most functions get called right away
            cont: Term = self.call(sig, depth, after)
            if self.rng.chance(1, 3):
                cont = Seq(self.term(self.rng.choice(TYPES), depth, after, False), cont)
        else:
            cont = self.term(ty, depth, after, tail)
        return LetRec(sig.name, sig.params, body, cont)

    def countdown(self, sig: Sig, depth: int, inside: _Scope) -> Term:
        n = sig.params[0]
        d = max(depth - 1, 0)
        base = self.term(sig.ret, d, inside, True)
        args: tuple[Term, ...] = (E(BinOp("sub", Var(n), Lit(Int(1)))),)
        args += tuple(self.term(t, d, inside, False) for t in sig.types[1:])
        step: Term = Call(sig.name, args)
        if self.rng.chance(1, 2):
            step = Seq(self.term(self.rng.choice(TYPES), d, inside, False), step)
        return If(E(BinOp("lt", Var(n), Lit(Int(1)))), base, step)

    # convertible programs

    def conv_program(self) -> ConvProgram:
        rng = self.rng
        sigs: list[Sig] = []
        funs: list[FunDef] = []
        for _ in range(rng.between(1, max(self.cfg.max_funs, 1))):
            sig = self.new_sig(False)
            own = tuple(
                (x, t, not (sig.counter and i == 0))
                for i, (x, t) in enumerate(zip(sig.params, sig.types))
            )
            scope = _Scope(own, tuple(sigs), True)
            if sig.counter:
                body = self.conv_countdown(sig, self.cfg.max_depth, scope)
            else:
                body = self.conv(sig.ret, self.cfg.max_depth, scope)
            funs.append(FunDef(sig.name, sig.params, body))
            sigs.append(sig)
        ty = rng.choice([s.ret for s in sigs])
        main = self.conv(ty, self.cfg.max_depth, _Scope((), tuple(sigs)), prefer_tail=True)
        return ConvProgram(tuple(funs), main)

    def conv(self, ty: str, depth: int, scope: _Scope, prefer_tail: bool = False) -> ConvTerm:
        rng = self.rng
        options = ["expr"]
        if depth > 0:
            options.append("if")
            if scope.assignable():
                options.append("assign")
        if any(s.ret == ty for s in scope.funs):
            options += ["tail"] * (4 if prefer_tail else 2)
        pick = rng.choice(options)
        d = depth - 1
        if pick == "expr":
            return ExprLeaf(self.expr(ty, 2, scope))
        if pick == "if":
            return IfConv(self.expr("bool", 2, scope), self.conv(ty, d, scope), self.conv(ty, d, scope))
        if pick == "assign":
            x, xty = rng.choice(scope.assignable())
            return AssignThen(x, self.expr(xty, 2, scope), self.conv(ty, d, scope))
        calls = [self.nested(rng.choice(scope.funs), depth, scope) for _ in range(rng.below(3))]
        last = rng.choice([s for s in scope.funs if s.ret == ty])
        return Tail(tuple(calls) + (self.nested(last, depth, scope),))

    def nested(self, sig: Sig, depth: int, scope: _Scope) -> NestedCall:
        if sig.types and depth > 0 and self.rng.chance(1, 2):
            fits = [s for s in scope.funs if s.ret == sig.types[-1]]
            if fits:
                args = tuple(self.expr(t, 2, scope) for t in sig.types[:-1])
                return NestedCall(sig.name, args, self.nested(self.rng.choice(fits), depth - 1, scope))
        return NestedCall(sig.name, tuple(self.expr(t, 2, scope) for t in sig.types))

    def conv_countdown(self, sig: Sig, depth: int, scope: _Scope) -> ConvTerm:
        n = sig.params[0]
        base = self.conv(sig.ret, depth - 1, scope)
        args = (BinOp("sub", Var(n), Lit(Int(1))),)
        args += tuple(self.expr(t, 2, scope) for t in sig.types[1:])
        calls = [self.nested(self.rng.choice(scope.funs), depth - 1, scope)
                 for _ in range(self.rng.below(2))] if scope.funs else []
        step = Tail(tuple(calls) + (NestedCall(sig.name, args),))
        return IfConv(BinOp("lt", Var(n), Lit(Int(1))), base, step)


def gen_term(cfg: GenConfig) -> Term:
    """A closed, validator-clean term drawn from ``cfg.seed``.

    In ``liftable`` mode a function defined inside another function body is
    only ever called in tail position of the body that encloses the call.
    In ``convertible`` mode the term is the nested form of
    :func:`gen_conv_program`.
    """
    if cfg.mode == "convertible":
        return unfloat(gen_conv_program(cfg))
    g = _Gen(cfg)
    ty = g.rng.choice(TYPES)
    if cfg.max_funs == 0:
        return g.term(ty, cfg.max_depth, _Scope(), False)
    return g.letrec(ty, cfg.max_depth, _Scope(), False)


def gen_conv_program(cfg: GenConfig) -> ConvProgram:
    return _Gen(cfg).conv_program()


def gen_samples(cfg: GenConfig, count: int) -> Iterator[tuple[int, Term]]:
    """``count`` terms, each paired with the seed that regenerates it."""
    for s in sample_seeds(cfg.seed, count):
        yield s, gen_term(replace(cfg, seed=s))


__all__ = [
    "GenConfig", "MODES", "SplitMix64", "gen_conv_program", "gen_samples", "gen_term",
    "sample_seeds",
]
