"""Big-step evaluators: naive, intermediate and optimised.

All three share one store discipline: a store is a plain ``dict`` from
locations to values, owned by a single run and threaded left to right.
Locations come from a per-run counter, so a freshly allocated location is
never in the store and never captured by any closure.

The naive rules keep every location forever.  The intermediate rules add
split environments ``<tail | rest>`` and clean the tail part of the store
at ``(val)``, ``(var)``, ``(assign)`` and on return from ``(call)``.  The
optimised rules additionally build compact closures at ``(letrec)``.
"""

from __future__ import annotations

import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Collection, Iterable, Mapping, NewType, Optional, TypeVar

from .terms import (
    UNIT,
    Assign,
    BinOp,
    Bool,
    Call,
    E,
    Expr,
    If,
    Int,
    LetRec,
    Lit,
    Seq,
    Term,
    Value,
    Var,
)

T = TypeVar("T")

Location = NewType("Location", int)
Store = dict  # Location -> Value

DEFAULT_FUEL = 100_000

MONITORS = frozenset({"aliasing", "compact", "fresh"})
FAULTS = frozenset({"drop-gc-val", "swap-seq-env"})


class EvalError(Exception):
    """An evaluation that did not produce a value.

    ``code`` is one of FUEL_EXHAUSTED, UNBOUND_VAR, UNBOUND_FUN,
    DANGLING_LOCATION, TYPE_ERROR, ARITY_MISMATCH, MONITOR_VIOLATION.
    """

    def __init__(self, code: str, message: str, step: int | None = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.step = step


class MonitorViolation(EvalError):
    def __init__(self, invariant: str, message: str, step: int):
        super().__init__("MONITOR_VIOLATION", f"{invariant} at step {step}: {message}", step)
        self.invariant = invariant


# --------------------------------------------------------------------------
# Environments and closures


@dataclass(frozen=True)
class VarEnv:
    """Ordered (name, location) bindings; later entries shadow earlier ones."""

    entries: tuple[tuple[str, Location], ...] = ()

    def lookup(self, x: str) -> Optional[Location]:
        for name, loc in reversed(self.entries):
            if name == x:
                return loc
        return None

    def extend(self, x: str, loc: Location) -> VarEnv:
        return VarEnv(self.entries + ((x, loc),))

    def dot(self, other: VarEnv) -> VarEnv:
        """``self . other``: bindings of ``self`` shadow those of ``other``."""
        if not other.entries:
            return self
        if not self.entries:
            return other
        return VarEnv(other.entries + self.entries)

    def without(self, names: Collection[str]) -> VarEnv:
        return VarEnv(tuple(e for e in self.entries if e[0] not in names))

    def domain(self) -> set[str]:
        return {name for name, _ in self.entries}

    def image(self) -> set[Location]:
        return {loc for _, loc in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


EMPTY_ENV = VarEnv()


def env_of(pairs: Mapping[str, int] | Iterable[tuple[str, int]]) -> VarEnv:
    items = pairs.items() if isinstance(pairs, Mapping) else pairs
    return VarEnv(tuple((x, Location(l)) for x, l in items))


@dataclass(frozen=True)
class SplitEnv:
    tail: VarEnv = EMPTY_ENV
    rest: VarEnv = EMPTY_ENV

    def joined(self) -> VarEnv:
        return self.tail.dot(self.rest)


@dataclass(frozen=True)
class Closure:
    params: tuple[str, ...]
    body: Term
    captured_vars: VarEnv
    captured_funs: FunEnv

    def is_compact(self) -> bool:
        return not (self.captured_vars.domain() & set(self.params))


@dataclass(frozen=True)
class FunEnv:
    entries: Mapping[str, Closure] = field(default_factory=dict)

    def lookup(self, f: str) -> Optional[Closure]:
        return self.entries.get(f)

    def extend(self, f: str, c: Closure) -> FunEnv:
        new = dict(self.entries)
        new[f] = c
        return FunEnv(new)

    def __len__(self) -> int:
        return len(self.entries)


EMPTY_FUNS = FunEnv()


def _closures(F: FunEnv) -> Iterable[Closure]:
    """Every closure reachable from ``F``, each once."""
    seen: set[int] = set()
    stack = list(F.entries.values())
    while stack:
        c = stack.pop()
        if id(c) in seen:
            continue
        seen.add(id(c))
        yield c
        stack.extend(c.captured_funs.entries.values())


def env_set(F: FunEnv) -> list[VarEnv]:
    """The variable environments captured anywhere inside ``F``."""
    return [c.captured_vars for c in _closures(F)]


def env_locations(F: FunEnv) -> set[Location]:
    """Locations that appear in ``F``."""
    out: set[Location] = set()
    for env in env_set(F):
        out |= env.image()
    return out


def close_env(F: FunEnv) -> FunEnv:
    """Canonical compact environment: drop from each captured environment the
    variables hidden by the closure's own parameters, recursively."""
    memo: dict[int, Closure] = {}

    def close(c: Closure) -> Closure:
        key = id(c)
        if key not in memo:
            memo[key] = Closure(
                c.params, c.body, c.captured_vars.without(c.params), close_funs(c.captured_funs)
            )
        return memo[key]

    def close_funs(G: FunEnv) -> FunEnv:
        return FunEnv({f: close(c) for f, c in G.entries.items()})

    return close_funs(F)


def is_compact_env(F: FunEnv) -> bool:
    return all(c.is_compact() for c in _closures(F))


def check_aliasing_free(envs: Iterable[VarEnv]) -> bool:
    """No location is bound to two different names across ``envs``."""
    owner: dict[Location, str] = {}
    for env in envs:
        for name, loc in env.entries:
            if owner.setdefault(loc, name) != name:
                return False
    return True


# --------------------------------------------------------------------------
# Stores


def gc_clean(env: VarEnv, s: Mapping[Location, Value]) -> Store:
    """``s`` restricted to the locations not bound by ``env``."""
    dead = env.image()
    return {l: v for l, v in s.items() if l not in dead}


def store_leq(s: Mapping[Location, Value], t: Mapping[Location, Value]) -> bool:
    """Store extension: ``t`` agrees with ``s`` on all of ``s``'s domain."""
    return all(l in t and t[l] == v for l, v in s.items())


# --------------------------------------------------------------------------
# Expressions


def apply_binop(op: str, a: Value, b: Value) -> Value:
    if not (isinstance(a, Int) and isinstance(b, Int)):
        raise EvalError("TYPE_ERROR", f"operator {op} applied to {a} and {b}")
    if op == "add":
        return Int(a.n + b.n)
    if op == "sub":
        return Int(a.n - b.n)
    if op == "lt":
        return Bool(a.n < b.n)
    return Bool(a.n == b.n)


def eval_pure(e: Expr, read: Callable[[str], Value]) -> Value:
    if isinstance(e, Lit):
        return e.v
    if isinstance(e, Var):
        return read(e.x)
    return apply_binop(e.op, eval_pure(e.left, read), eval_pure(e.right, read))


# --------------------------------------------------------------------------
# Runs


@dataclass
class EvalStats:
    steps: int = 0
    max_store: int = 0
    fresh_allocated: int = 0


@dataclass
class EvalOutcome:
    value: Value
    final_store: Store
    stats: EvalStats


@dataclass(frozen=True)
class CallEvent:
    """What an observer sees at each ``(call)``.

    ``pre_store`` is a copy of the store once the arguments are evaluated
    and before the parameters are bound.  ``store`` is the live store.
    """

    kind: str  # "enter" or "return"
    step: int
    f: str
    funs: FunEnv
    env: SplitEnv
    store: Store
    pre_store: Optional[Store] = None


Observer = Callable[[CallEvent], None]


class _Run:
    def __init__(
        self,
        mode: str,
        fuel: int,
        monitors: Collection[str] = (),
        faults: Collection[str] = (),
        trace: Optional[Callable[[dict], None]] = None,
        observer: Optional[Observer] = None,
    ):
        unknown = (set(monitors) - MONITORS) | (set(faults) - FAULTS)
        if unknown:
            raise ValueError(f"unknown monitor or fault: {sorted(unknown)}")
        self.mode = mode
        self.split = mode != "naive"
        self.compact = mode == "optimised"
        self.fuel = fuel
        self.monitors = frozenset(monitors)
        self.faults = frozenset(faults)
        self.trace = trace
        self.observer = observer
        self.store: Store = {}
        self.next_loc = 0
        self.stats = EvalStats()

    # bookkeeping

    def tick(self, rule: str, env: VarEnv) -> None:
        self.stats.steps += 1
        if self.stats.steps > self.fuel:
            raise EvalError("FUEL_EXHAUSTED", f"no value after {self.fuel} rule applications")
        if self.trace is not None:
            self.trace(
                {
                    "step": self.stats.steps,
                    "rule": rule,
                    "store_size": len(self.store),
                    "env_depth": len(env),
                }
            )

    def note_store(self) -> None:
        if len(self.store) > self.stats.max_store:
            self.stats.max_store = len(self.store)

    def fresh(self) -> Location:
        loc = Location(self.next_loc)
        self.next_loc += 1
        self.stats.fresh_allocated += 1
        return loc

    def clean(self, env: VarEnv) -> None:
        for loc in env.image():
            self.store.pop(loc, None)

    def read(self, env: VarEnv, x: str) -> Value:
        loc = env.lookup(x)
        if loc is None:
            raise EvalError("UNBOUND_VAR", f"variable {x} is not bound", self.stats.steps)
        if loc not in self.store:
            raise EvalError(
                "DANGLING_LOCATION", f"variable {x} is bound to l{loc}, absent from the store",
                self.stats.steps,
            )
        return self.store[loc]

    def violation(self, invariant: str, message: str) -> MonitorViolation:
        return MonitorViolation(invariant, message, self.stats.steps)

    # naive rules: environment rho, functions F

    def naive(self, t: Term, rho: VarEnv, F: FunEnv) -> Value:
        if isinstance(t, E):
            self.tick(_expr_rule(t.e), rho)
            return eval_pure(t.e, lambda x: self.read(rho, x))
        if isinstance(t, Assign):
            self.tick("assign", rho)
            v = self.naive(t.rhs, rho, F)
            loc = self._assign_target(rho, t.x)
            self.store[loc] = v
            return UNIT
        if isinstance(t, Seq):
            self.tick("seq", rho)
            self.naive(t.first, rho, F)
            return self.naive(t.second, rho, F)
        if isinstance(t, If):
            c = self.naive(t.cond, rho, F)
            self.tick(_if_rule(c, self), rho)
            return self.naive(t.then if c.truth else t.else_, rho, F)
        if isinstance(t, LetRec):
            self.tick("letrec", rho)
            return self.naive(t.cont, rho, F.extend(t.f, Closure(t.params, t.body, rho, F)))
        if isinstance(t, Call):
            self.tick("call", rho)
            c = self._callee(F, t)
            args = [self.naive(a, rho, F) for a in t.args]
            callee_funs = c.captured_funs.extend(t.f, c)
            pre = dict(self.store) if self.observer else None
            inner = self._bind(t, c, args, callee_funs)
            if self.observer:
                self.observer(CallEvent("enter", self.stats.steps, t.f, callee_funs,
                                        SplitEnv(inner, c.captured_vars), self.store, pre))
            v = self.naive(c.body, inner.dot(c.captured_vars), callee_funs)
            if self.observer:
                self.observer(CallEvent("return", self.stats.steps, t.f, callee_funs,
                                        SplitEnv(inner, c.captured_vars), self.store, pre))
            return v
        raise TypeError(f"not a term: {t!r}")

    # split rules: intermediate and optimised

    def opt(self, t: Term, env: SplitEnv, F: FunEnv) -> Value:
        joined = env.joined()
        nontail = SplitEnv(EMPTY_ENV, joined)
        if isinstance(t, E):
            self.tick(_expr_rule(t.e), joined)
            v = eval_pure(t.e, lambda x: self.read(joined, x))
            if not (isinstance(t.e, Lit) and "drop-gc-val" in self.faults):
                self.clean(env.tail)
            return v
        if isinstance(t, Assign):
            self.tick("assign", joined)
            v = self.opt(t.rhs, nontail, F)
            loc = self._assign_target(joined, t.x)
            self.store[loc] = v
            self.clean(env.tail)
            return UNIT
        if isinstance(t, Seq):
            self.tick("seq", joined)
            if "swap-seq-env" in self.faults:
                self.opt(t.first, env, F)
                return self.opt(t.second, nontail, F)
            self.opt(t.first, nontail, F)
            return self.opt(t.second, env, F)
        if isinstance(t, If):
            c = self.opt(t.cond, nontail, F)
            self.tick(_if_rule(c, self), joined)
            return self.opt(t.then if c.truth else t.else_, env, F)
        if isinstance(t, LetRec):
            self.tick("letrec", joined)
            captured = joined.without(t.params) if self.compact else joined
            closure = Closure(t.params, t.body, captured, F)
            if self.compact and "compact" in self.monitors and not closure.is_compact():
                raise self.violation("compact", f"closure of {t.f} captures one of its parameters")
            return self.opt(t.cont, env, F.extend(t.f, closure))
        if isinstance(t, Call):
            self.tick("call", joined)
            c = self._callee(F, t)
            args = [self.opt(a, nontail, F) for a in t.args]
            callee_funs = c.captured_funs.extend(t.f, c)
            pre = dict(self.store) if self.observer else None
            inner = self._bind(t, c, args, callee_funs)
            callee_env = SplitEnv(inner, c.captured_vars)
            if "aliasing" in self.monitors:
                self._check_aliasing(F, env, "caller")
                self._check_aliasing(callee_funs, callee_env, "callee")
            if self.compact and "compact" in self.monitors and not is_compact_env(callee_funs):
                raise self.violation("compact", f"environment of {t.f} holds a non-compact closure")
            if self.observer:
                self.observer(CallEvent("enter", self.stats.steps, t.f, callee_funs, callee_env, self.store, pre))
            v = self.opt(c.body, callee_env, callee_funs)
            if self.observer:
                self.observer(CallEvent("return", self.stats.steps, t.f, callee_funs, callee_env, self.store, pre))
            self.clean(env.tail)
            return v
        raise TypeError(f"not a term: {t!r}")

    # shared pieces of (call) and (assign)

    def _callee(self, F: FunEnv, t: Call) -> Closure:
        c = F.lookup(t.f)
        if c is None:
            raise EvalError("UNBOUND_FUN", f"function {t.f} is not bound", self.stats.steps)
        if len(c.params) != len(t.args):
            raise EvalError(
                "ARITY_MISMATCH",
                f"{t.f} takes {len(c.params)} arguments, {len(t.args)} given",
                self.stats.steps,
            )
        return c

    def _bind(self, t: Call, c: Closure, args: list[Value], callee_funs: FunEnv) -> VarEnv:
        inner = EMPTY_ENV
        fresh = []
        for x, v in zip(c.params, args):
            loc = self.fresh()
            fresh.append(loc)
            inner = inner.extend(x, loc)
        if "fresh" in self.monitors:
            taken = env_locations(callee_funs)
            for loc in fresh:
                if loc in self.store or loc in taken:
                    raise self.violation("fresh", f"location l{loc} for {t.f} is not fresh")
        for loc, v in zip(fresh, args):
            self.store[loc] = v
        self.note_store()
        return inner

    def _assign_target(self, env: VarEnv, x: str) -> Location:
        loc = env.lookup(x)
        if loc is None:
            raise EvalError("UNBOUND_VAR", f"assignment to unbound {x}", self.stats.steps)
        if loc not in self.store:
            raise EvalError(
                "DANGLING_LOCATION", f"assignment to {x} at l{loc}, absent from the store",
                self.stats.steps,
            )
        return loc

    def _check_aliasing(self, F: FunEnv, env: SplitEnv, where: str) -> None:
        if not check_aliasing_free(env_set(F) + [env.rest, env.tail]):
            raise self.violation("aliasing", f"{where} environments share a location between names")


def _expr_rule(e: Expr) -> str:
    if isinstance(e, Lit):
        return "val"
    if isinstance(e, Var):
        return "var"
    return "expr"


def _if_rule(c: Value, run: _Run) -> str:
    if not isinstance(c, Bool):
        raise EvalError("TYPE_ERROR", f"condition evaluated to {c}", run.stats.steps)
    return "if-t" if c.truth else "if-f"


# Derivations nest as deep as the program recurses, far past the default
# host stack, so evaluation runs on one worker thread with a large stack.
_DEEP_STACK = 512 * 1024 * 1024
_DEEP_RECURSION = 250_000
_worker: Optional[ThreadPoolExecutor] = None
_worker_lock = threading.Lock()


def _in_deep_thread(fn: Callable[[], T]) -> T:
    global _worker
    if threading.current_thread().name.startswith("contpass-deep"):
        return fn()
    with _worker_lock:
        if _worker is None:
            old = threading.stack_size(_DEEP_STACK)
            try:
                _worker = ThreadPoolExecutor(1, thread_name_prefix="contpass-deep")
                _worker.submit(lambda: None).result()  # start the thread now
            finally:
                threading.stack_size(old)
            if sys.getrecursionlimit() < _DEEP_RECURSION:
                sys.setrecursionlimit(_DEEP_RECURSION)
    return _worker.submit(fn).result()


def _evaluate(t: Term, run: _Run) -> EvalOutcome:
    def go() -> Value:
        if run.split:
            return run.opt(t, SplitEnv(), EMPTY_FUNS)
        return run.naive(t, EMPTY_ENV, EMPTY_FUNS)

    try:
        v = _in_deep_thread(go)
    except RecursionError:
        raise EvalError("FUEL_EXHAUSTED", "derivation too deep for the host stack") from None
    run.note_store()
    return EvalOutcome(v, dict(run.store), run.stats)


def eval_naive(
    t: Term,
    fuel: int = DEFAULT_FUEL,
    *,
    monitors: Collection[str] = (),
    trace: Optional[Callable[[dict], None]] = None,
    observer: Optional[Observer] = None,
) -> EvalOutcome:
    """Evaluate a closed term with the naive rules from empty environments."""
    return _evaluate(t, _Run("naive", fuel, monitors, (), trace, observer))


def eval_intermediate(
    t: Term,
    fuel: int = DEFAULT_FUEL,
    *,
    monitors: Collection[str] = (),
    faults: Collection[str] = (),
    trace: Optional[Callable[[dict], None]] = None,
    observer: Optional[Observer] = None,
) -> EvalOutcome:
    """Minimal stores, closures capture the whole split environment."""
    return _evaluate(t, _Run("intermediate", fuel, monitors, faults, trace, observer))


def eval_optimised(
    t: Term,
    fuel: int = DEFAULT_FUEL,
    monitors: Collection[str] = (),
    *,
    faults: Collection[str] = (),
    trace: Optional[Callable[[dict], None]] = None,
    observer: Optional[Observer] = None,
) -> EvalOutcome:
    """Minimal stores and compact closures.

    ``monitors`` may contain ``"aliasing"`` (aliasing-free environments at
    every call), ``"compact"`` (every closure built is compact) and
    ``"fresh"`` (allocated locations are unused); a failing check raises
    :class:`MonitorViolation`.
    """
    return _evaluate(t, _Run("optimised", fuel, monitors, faults, trace, observer))


EVALUATORS = {
    "naive": eval_naive,
    "intermediate": eval_intermediate,
    "optimised": eval_optimised,
}
