"""Lambda-lifting: parameter lifting, liftability, block floating.

Positions inside a term are paths of child indices, following the child
order of :func:`contpass.terms.children` (``If``: cond, then, else;
``Seq``: first, second; ``LetRec``: body, cont; ``Call``: the arguments;
``Assign``: the right-hand side).  The empty path is the whole term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

from .bigstep import CallEvent, Closure, FunEnv, env_set
from .terms import (
    Assign,
    Call,
    E,
    If,
    LetRec,
    Seq,
    Term,
    Var,
    children,
    expr_vars,
    free_vars,
    pretty_print,
)

Position = tuple[int, ...]


class LiftError(Exception):
    """``code`` is TARGET_NOT_FOUND, NOT_LIFTABLE, NO_FIXPOINT or NOT_CLOSED."""

    def __init__(self, code: str, message: str, report: Optional[LiftReport] = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.report = report


# --------------------------------------------------------------------------
# Positions


def tail_positions(t: Term) -> set[Position]:
    out: set[Position] = set()

    def go(u: Term, at: Position) -> None:
        out.add(at)
        if isinstance(u, If):
            go(u.then, at + (1,))
            go(u.else_, at + (2,))
        elif isinstance(u, Seq):
            go(u.second, at + (1,))
        elif isinstance(u, LetRec):
            go(u.cont, at + (1,))

    go(t, ())
    return out


def local_positions(t: Term) -> set[Position]:
    """Every position except those inside the body of a ``letrec``."""
    out: set[Position] = set()

    def go(u: Term, at: Position) -> None:
        out.add(at)
        if isinstance(u, LetRec):
            go(u.cont, at + (1,))
            return
        for i, c in enumerate(children(u)):
            go(c, at + (i,))

    go(t, ())
    return out


def subterm_at(t: Term, at: Position) -> Term:
    for i in at:
        t = children(t)[i]
    return t


def _walk(t: Term, at: Position = ()) -> Iterator[tuple[Position, Term]]:
    yield at, t
    for i, c in enumerate(children(t)):
        yield from _walk(c, at + (i,))


# --------------------------------------------------------------------------
# Targets and liftability


@dataclass(frozen=True)
class LiftTarget:
    param: str
    owner: str
    inner_funs: frozenset[str]


@dataclass
class LiftReport:
    target: LiftTarget
    violations: list[tuple[Any, str]] = field(default_factory=list)

    @property
    def liftable(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "param": self.target.param,
            "owner": self.target.owner,
            "inner_funs": sorted(self.target.inner_funs),
            "liftable": self.liftable,
            "violations": [
                {
                    "line": getattr(span, "line", None),
                    "column": getattr(span, "column", None),
                    "reason": reason,
                }
                for span, reason in self.violations
            ],
        }


def _find_owner(t: Term, param: str, owner: str) -> tuple[Position, LetRec]:
    for at, u in _walk(t):
        if isinstance(u, LetRec) and u.f == owner and param in u.params:
            return at, u
    raise LiftError("TARGET_NOT_FOUND", f"no function {owner} with parameter {param}")


def inner_functions(body: Term) -> frozenset[str]:
    """Names of the functions defined at any depth inside ``body``."""
    return frozenset(u.f for _, u in _walk(body) if isinstance(u, LetRec))


def make_target(t: Term, param: str, owner: str) -> LiftTarget:
    _, g = _find_owner(t, param, owner)
    return LiftTarget(param, owner, inner_functions(g.body))


def all_targets(t: Term) -> list[LiftTarget]:
    """One target per parameter of every function, in definition order."""
    out = []
    for _, u in _walk(t):
        if isinstance(u, LetRec):
            inner = inner_functions(u.body)
            out.extend(LiftTarget(x, u.f, inner) for x in u.params)
    return out


def check_liftable(t: Term, target: LiftTarget) -> LiftReport:
    """Every call to an inner function of the owner must sit in tail position
    of the body of the function that immediately encloses it."""
    _, g = _find_owner(t, target.param, target.owner)
    report = LiftReport(target)

    def go(u: Term, tail: bool, scope: frozenset[str], fun: str) -> None:
        if isinstance(u, Call) and u.f in target.inner_funs:
            if u.f not in scope:
                report.violations.append(
                    (u.span, f"call to {u.f} resolves to a function defined outside {target.owner}")
                )
            elif not tail:
                report.violations.append(
                    (u.span, f"call {pretty_print(u)} is not in tail position of {fun}")
                )
        if isinstance(u, If):
            go(u.cond, False, scope, fun)
            go(u.then, tail, scope, fun)
            go(u.else_, tail, scope, fun)
        elif isinstance(u, Seq):
            go(u.first, False, scope, fun)
            go(u.second, tail, scope, fun)
        elif isinstance(u, LetRec):
            inner = scope | {u.f}
            go(u.body, True, inner, u.f)
            go(u.cont, tail, inner, fun)
        else:
            for c in children(u):
                go(c, False, scope, fun)

    go(g.body, True, frozenset(), g.f)
    return report


# --------------------------------------------------------------------------
# Parameter lifting


def lift_term(t: Term, x: str, inner_funs: frozenset[str]) -> Term:
    """Structural parameter lifting of ``x`` through the functions named in
    ``inner_funs``: their definitions gain a trailing parameter ``x`` and
    their calls a trailing argument ``x``.  Everything else, assignments to
    ``x`` included, is mapped unchanged."""
    if not inner_funs:
        return t

    def go(u: Term) -> Term:
        if isinstance(u, E):
            return u
        if isinstance(u, Assign):
            return Assign(u.x, go(u.rhs), u.span)
        if isinstance(u, If):
            return If(go(u.cond), go(u.then), go(u.else_), u.span)
        if isinstance(u, Seq):
            return Seq(go(u.first), go(u.second), u.span)
        if isinstance(u, LetRec):
            params = u.params + (x,) if u.f in inner_funs else u.params
            return LetRec(u.f, params, go(u.body), go(u.cont), u.span)
        if isinstance(u, Call):
            args = tuple(go(a) for a in u.args)
            if u.f in inner_funs:
                args += (E(Var(x)),)
            return Call(u.f, args, u.span)
        raise TypeError(f"not a term: {u!r}")

    return go(t)


def _replace_at(t: Term, at: Position, new: Term) -> Term:
    if not at:
        return new
    i, rest = at[0], at[1:]
    kids = list(children(t))
    kids[i] = _replace_at(kids[i], rest, new)
    if isinstance(t, Assign):
        return Assign(t.x, kids[0], t.span)
    if isinstance(t, If):
        return If(kids[0], kids[1], kids[2], t.span)
    if isinstance(t, Seq):
        return Seq(kids[0], kids[1], t.span)
    if isinstance(t, LetRec):
        return LetRec(t.f, t.params, kids[0], kids[1], t.span)
    if isinstance(t, Call):
        return Call(t.f, tuple(kids), t.span)
    raise TypeError(f"no children in {t!r}")


def lift_param(t: Term, target: LiftTarget) -> Term:
    """Lift ``target.param`` into every inner function of ``target.owner``.

    Raises LiftError(NOT_LIFTABLE) when some inner function is called
    outside tail position.
    """
    report = check_liftable(t, target)
    if not report.liftable:
        raise LiftError(
            "NOT_LIFTABLE",
            f"{target.param} of {target.owner}: {report.violations[0][1]}",
            report,
        )
    at, g = _find_owner(t, target.param, target.owner)
    body = lift_term(g.body, target.param, target.inner_funs)
    return _replace_at(t, at, LetRec(g.f, g.params, body, g.cont, g.span))


def _candidates(t: Term) -> list[LiftTarget]:
    # (param, owner) pairs whose param is free in some function nested in owner
    out = []
    for _, u in _walk(t):
        if not isinstance(u, LetRec):
            continue
        nested = [v for _, v in _walk(u.body) if isinstance(v, LetRec)]
        if not nested:
            continue
        used: set[str] = set()
        for h in nested:
            used |= free_vars(h.body) - set(h.params)
        inner = frozenset(h.f for h in nested)
        out.extend(LiftTarget(x, u.f, inner) for x in sorted(set(u.params) & used))
    return out


def lift_all(t: Term, max_rounds: int | None = None) -> Term:
    """Lift parameters until no function body has a free variable.

    Owners are processed outermost first and, within one owner, parameters
    in name order; a function therefore ends up with its own parameters
    followed by the lifted ones ordered by the depth of their owner.
    """
    if max_rounds is None:
        max_rounds = 1 + sum(len(u.params) for _, u in _walk(t) if isinstance(u, LetRec))
    for _ in range(max_rounds):
        todo = _candidates(t)
        if not todo:
            return t
        t = lift_param(t, todo[0])
    if _candidates(t):
        raise LiftError("NO_FIXPOINT", f"free variables remain after {max_rounds} rounds")
    return t


def lifted_params(t: Term) -> frozenset[str]:
    """Parameter names bound more than once, i.e. those lifting duplicated."""
    seen: set[str] = set()
    dup: set[str] = set()
    for _, u in _walk(t):
        if isinstance(u, LetRec):
            for x in u.params:
                (dup if x in seen else seen).add(x)
    return frozenset(dup)


def rename_params(t: Term) -> Term:
    """Alpha-rename so that every parameter name is bound once.

    Later bindings of an already used name become ``name_1``, ``name_2``...
    """
    used: set[str] = set()
    for _, u in _walk(t):
        if isinstance(u, LetRec):
            used.update(u.params)
        elif isinstance(u, E):
            used |= expr_vars(u.e)
    taken: set[str] = set()

    def fresh(x: str) -> str:
        if x not in taken:
            taken.add(x)
            return x
        k = 1
        while f"{x}_{k}" in used or f"{x}_{k}" in taken:
            k += 1
        name = f"{x}_{k}"
        taken.add(name)
        return name

    def go(u: Term, ren: dict[str, str]) -> Term:
        if isinstance(u, E):
            return E(_rename_expr(u.e, ren), u.span)
        if isinstance(u, Assign):
            return Assign(ren.get(u.x, u.x), go(u.rhs, ren), u.span)
        if isinstance(u, If):
            return If(go(u.cond, ren), go(u.then, ren), go(u.else_, ren), u.span)
        if isinstance(u, Seq):
            return Seq(go(u.first, ren), go(u.second, ren), u.span)
        if isinstance(u, LetRec):
            new = [fresh(x) for x in u.params]
            inner = dict(ren)
            inner.update(zip(u.params, new))
            return LetRec(u.f, tuple(new), go(u.body, inner), go(u.cont, ren), u.span)
        if isinstance(u, Call):
            return Call(u.f, tuple(go(a, ren) for a in u.args), u.span)
        raise TypeError(f"not a term: {u!r}")

    return go(t, {})


def _rename_expr(e, ren: dict[str, str]):
    from .terms import BinOp

    if isinstance(e, Var):
        return Var(ren.get(e.x, e.x))
    if isinstance(e, BinOp):
        return BinOp(e.op, _rename_expr(e.left, ren), _rename_expr(e.right, ren))
    return e


# --------------------------------------------------------------------------
# Lifting environments


def lift_env(F: FunEnv, target: LiftTarget) -> FunEnv:
    """Lifted form of a function environment: closures of inner functions
    take the lifted parameter and stop capturing it; every body is lifted."""
    x, inner = target.param, target.inner_funs
    memo: dict[int, Closure] = {}

    def lift_closure(f: str, c: Closure) -> Closure:
        key = id(c)
        if key not in memo:
            body = lift_term(c.body, x, inner)
            nested = lift_funs(c.captured_funs)
            if f in inner:
                memo[key] = Closure(c.params + (x,), body, c.captured_vars.without((x,)), nested)
            else:
                memo[key] = Closure(c.params, body, c.captured_vars, nested)
        return memo[key]

    def lift_funs(G: FunEnv) -> FunEnv:
        return FunEnv({f: lift_closure(f, c) for f, c in G.entries.items()})

    return lift_funs(F)


@dataclass
class CaptureMonitor:
    """Observer for an optimised run: at every call, the lifted form of the
    callee's function environment must not capture any lifted parameter."""

    targets: list[LiftTarget]
    checked: int = 0
    occurrences: list[tuple[int, str, str]] = field(default_factory=list)

    def __call__(self, event: CallEvent) -> None:
        if event.kind != "enter":
            return
        for target in self.targets:
            self.checked += 1
            for env in env_set(lift_env(event.funs, target)):
                if target.param in env.domain():
                    self.occurrences.append((event.step, target.owner, target.param))
                    break


# --------------------------------------------------------------------------
# Block floating


@dataclass(frozen=True)
class FunDef:
    name: str
    params: tuple[str, ...]
    body: Term


@dataclass(frozen=True)
class Program:
    functions: tuple[FunDef, ...]
    main: Term

    def lookup(self, f: str) -> Optional[FunDef]:
        for d in self.functions:
            if d.name == f:
                return d
        return None

    def pretty(self) -> str:
        lines = [f"{d.name}({', '.join(d.params)}) = {{ {pretty_print(d.body)} }}" for d in self.functions]
        lines.append(f"main = {{ {pretty_print(self.main)} }}")
        return "\n".join(lines)


def uniquify_functions(t: Term) -> Term:
    """Alpha-rename functions so no two ``letrec`` share a name."""
    names = [u.f for _, u in _walk(t) if isinstance(u, LetRec)]
    if len(names) == len(set(names)):
        return t
    taken: set[str] = set()
    all_names = set(names)

    def fresh(f: str) -> str:
        if f not in taken:
            taken.add(f)
            return f
        k = 1
        while f"{f}_{k}" in taken or f"{f}_{k}" in all_names:
            k += 1
        taken.add(f"{f}_{k}")
        return f"{f}_{k}"

    def go(u: Term, ren: dict[str, str]) -> Term:
        if isinstance(u, E):
            return u
        if isinstance(u, Assign):
            return Assign(u.x, go(u.rhs, ren), u.span)
        if isinstance(u, If):
            return If(go(u.cond, ren), go(u.then, ren), go(u.else_, ren), u.span)
        if isinstance(u, Seq):
            return Seq(go(u.first, ren), go(u.second, ren), u.span)
        if isinstance(u, LetRec):
            inner = dict(ren)
            inner[u.f] = fresh(u.f)
            return LetRec(inner[u.f], u.params, go(u.body, inner), go(u.cont, inner), u.span)
        if isinstance(u, Call):
            return Call(ren.get(u.f, u.f), tuple(go(a, ren) for a in u.args), u.span)
        raise TypeError(f"not a term: {u!r}")

    return go(t, {})


def float_blocks(t: Term) -> Program:
    """Hoist every ``letrec`` to a flat list of top-level functions.

    Functions are listed in definition order (pre-order).  Function names
    are made unique first, since the floated functions share one scope.
    """
    t = uniquify_functions(t)
    defs: list[FunDef] = []

    def go(u: Term) -> Term:
        if isinstance(u, LetRec):
            loose = free_vars(u.body) - set(u.params)
            if loose:
                raise LiftError(
                    "NOT_CLOSED", f"body of {u.f} has free variables {sorted(loose)}"
                )
            slot = len(defs)
            defs.append(None)  # reserve the slot so nested functions come after
            defs[slot] = FunDef(u.f, u.params, go(u.body))
            return go(u.cont)
        if isinstance(u, E):
            return u
        if isinstance(u, Assign):
            return Assign(u.x, go(u.rhs), u.span)
        if isinstance(u, If):
            return If(go(u.cond), go(u.then), go(u.else_), u.span)
        if isinstance(u, Seq):
            return Seq(go(u.first), go(u.second), u.span)
        if isinstance(u, Call):
            return Call(u.f, tuple(go(a) for a in u.args), u.span)
        raise TypeError(f"not a term: {u!r}")

    main = go(t)
    return Program(tuple(defs), main)
