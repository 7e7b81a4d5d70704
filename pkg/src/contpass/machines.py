"""Small-step machines for convertible and CPS programs.

Both machines share the state shapes below and number their rules alike:

    1 assignment            6 expression under an empty context: Done
    2, 3 if true / false    7 tail in head position: substitute the store
    4 expression, frame     8 push a plain frame
    5 expression, hole      9 push a hole frame
                            10 empty tail under a plain frame: enter callee

Rule 7 also evaluates every argument to a value, so frames only ever hold
values.  The ``lazy`` machine skips that substitution and instead evaluates
the arguments of each frame when it is pushed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .bigstep import DEFAULT_FUEL, EvalError, eval_pure
from .cps import (
    AssignThen,
    Context,
    Continuation,
    ConvProgram,
    ConvTerm,
    CpsAssign,
    CpsIf,
    CpsProgram,
    CpsTerm,
    ExprLeaf,
    Frame,
    IfConv,
    Invoke,
    InvokeExpr,
    NestedCall,
    PushThen,
    Tail,
    conv_to_term,
    convert_context,
    convert_program,
    convert_tail,
    cps_convert,
    pretty_cps,
)
from .terms import Bool, Expr, Lit, Value, pretty_print

FrameStore = Mapping[str, Value]
Stack = Union[Context, Continuation]


class MachineError(EvalError):
    """``code`` is STUCK, ARITY_MISMATCH, FUEL_EXHAUSTED, UNBOUND_VAR or TYPE_ERROR."""


@dataclass(frozen=True)
class HeadState:
    t: Union[ConvTerm, CpsTerm]
    k: Stack
    sigma: FrameStore = field(default_factory=dict)


@dataclass(frozen=True)
class TailState:
    q: Union[Tail, CpsTerm]
    k: Stack


@dataclass(frozen=True)
class LazyTailState:
    q: Tail
    k: Stack
    sigma: FrameStore


@dataclass(frozen=True)
class Done:
    v: Value


MachineState = Union[HeadState, TailState, LazyTailState, Done]


def eval_expr(e: Expr, sigma: FrameStore) -> Value:
    def read(x: str) -> Value:
        if x not in sigma:
            raise MachineError("UNBOUND_VAR", f"variable {x} is not in the frame store")
        return sigma[x]

    return eval_pure(e, read)


def _truth(e: Expr, sigma: FrameStore) -> bool:
    c = eval_expr(e, sigma)
    if not isinstance(c, Bool):
        raise MachineError("TYPE_ERROR", f"condition evaluated to {c}")
    return c.truth


def _values(args: tuple[Expr, ...], f: str) -> tuple[Value, ...]:
    if not all(isinstance(a, Lit) for a in args):
        raise MachineError("STUCK", f"arguments of {f} are not values")
    return tuple(a.v for a in args)


def _subst_call(c: NestedCall, sigma: FrameStore) -> NestedCall:
    args = tuple(Lit(eval_expr(a, sigma)) for a in c.args)
    nested = _subst_call(c.nested, sigma) if c.nested is not None else None
    return NestedCall(c.f, args, nested)


def _subst_queue(q: CpsTerm, sigma: FrameStore) -> CpsTerm:
    if isinstance(q, PushThen):
        args = tuple(Lit(eval_expr(a, sigma)) for a in q.args)
        return PushThen(q.f, args, q.hole, _subst_queue(q.rest, sigma))
    return q


def _enter(prog, frames: tuple[Frame, ...], wrap) -> HeadState:
    if not frames:
        raise MachineError("STUCK", "empty tail with nothing left to call")
    head, rest = frames[0], frames[1:]
    if head.hole:
        raise MachineError("STUCK", f"frame {head.describe()} still waits for a value")
    d = prog.lookup(head.f)
    if d is None:
        raise MachineError("STUCK", f"no function named {head.f}")
    if len(d.params) != len(head.args):
        raise MachineError(
            "ARITY_MISMATCH", f"{head.f} takes {len(d.params)} arguments, {len(head.args)} given"
        )
    return HeadState(d.body, wrap(rest), dict(zip(d.params, head.args)))


def _leave(v: Value, frames: tuple[Frame, ...], wrap, tail) -> tuple[int, MachineState]:
    if not frames:
        return 6, Done(v)
    head, rest = frames[0], frames[1:]
    if head.hole:
        return 5, TailState(tail, wrap((Frame(head.f, head.args + (v,)),) + rest))
    return 4, TailState(tail, wrap(frames))


def fire_convertible(
    s: MachineState, prog: ConvProgram, *, lazy: bool = False
) -> tuple[int, MachineState]:
    """Apply the single rule that matches ``s``; return its number and the result."""
    if isinstance(s, HeadState):
        t, frames, sigma = s.t, s.k.frames, s.sigma
        if isinstance(t, AssignThen):
            return 1, HeadState(t.rest, s.k, {**sigma, t.x: eval_expr(t.e, sigma)})
        if isinstance(t, IfConv):
            if _truth(t.cond, sigma):
                return 2, HeadState(t.then, s.k, sigma)
            return 3, HeadState(t.else_, s.k, sigma)
        if isinstance(t, ExprLeaf):
            return _leave(eval_expr(t.e, sigma), frames, Context, Tail())
        if isinstance(t, Tail):
            if lazy:
                return 7, LazyTailState(t, s.k, sigma)
            return 7, TailState(Tail(tuple(_subst_call(c, sigma) for c in t.calls)), s.k)
        raise MachineError("STUCK", f"not a convertible term: {t!r}")
    if isinstance(s, (TailState, LazyTailState)):
        calls, frames = s.q.calls, s.k.frames
        if not calls:
            return 10, _enter(prog, frames, Context)
        last = calls[-1]
        if isinstance(s, LazyTailState):
            args = tuple(eval_expr(a, s.sigma) for a in last.args)
        else:
            args = _values(last.args, last.f)
        if last.nested is None:
            rule, rest = 8, calls[:-1]
        else:
            rule, rest = 9, calls[:-1] + (last.nested,)
        k = Context((Frame(last.f, args, rule == 9),) + frames)
        if isinstance(s, LazyTailState):
            return rule, LazyTailState(Tail(rest), k, s.sigma)
        return rule, TailState(Tail(rest), k)
    raise MachineError("STUCK", "the machine has already stopped")


def fire_cps(s: MachineState, prog: CpsProgram) -> tuple[int, MachineState]:
    if isinstance(s, HeadState):
        t, frames, sigma = s.t, s.k.frames, s.sigma
        if isinstance(t, CpsAssign):
            return 1, HeadState(t.rest, s.k, {**sigma, t.x: eval_expr(t.e, sigma)})
        if isinstance(t, CpsIf):
            if _truth(t.cond, sigma):
                return 2, HeadState(t.then, s.k, sigma)
            return 3, HeadState(t.else_, s.k, sigma)
        if isinstance(t, InvokeExpr):
            return _leave(eval_expr(t.e, sigma), frames, Continuation, Invoke())
        if isinstance(t, (Invoke, PushThen)):
            return 7, TailState(_subst_queue(t, sigma), s.k)
        raise MachineError("STUCK", f"not a CPS term: {t!r}")
    if isinstance(s, TailState):
        q, frames = s.q, s.k.frames
        if isinstance(q, Invoke):
            return 10, _enter(prog, frames, Continuation)
        if isinstance(q, PushThen):
            frame = Frame(q.f, _values(q.args, q.f), q.hole)
            return (9 if q.hole else 8), TailState(q.rest, Continuation((frame,) + frames))
        raise MachineError("STUCK", f"not a CPS tail: {q!r}")
    raise MachineError("STUCK", "the machine has already stopped")


def step_convertible(s: MachineState, prog: ConvProgram) -> MachineState:
    return fire_convertible(s, prog)[1]


def step_cps(s: MachineState, prog: CpsProgram) -> MachineState:
    return fire_cps(s, prog)[1]


# --------------------------------------------------------------------------
# Runs and traces


def _show_term(t) -> str:
    if isinstance(t, Tail):
        if not t.calls:
            return "eps"
        return pretty_print(conv_to_term(t))
    if isinstance(t, (ExprLeaf, AssignThen, IfConv)):
        return pretty_print(conv_to_term(t))
    return pretty_cps(t)


def state_to_json(s: MachineState) -> dict:
    if isinstance(s, Done):
        return {"kind": "done", "value": str(s.v)}
    out: dict = {
        "kind": "head" if isinstance(s, HeadState) else "tail",
        "term": _show_term(s.t if isinstance(s, HeadState) else s.q),
        "frames": [f.to_json() for f in s.k.frames],
    }
    if isinstance(s, (HeadState, LazyTailState)):
        out["sigma"] = {x: str(v) for x, v in sorted(s.sigma.items())}
    return out


@dataclass(frozen=True)
class TraceEvent:
    step: int
    rule: int
    state: dict

    def to_json(self) -> dict:
        return {"step": self.step, "rule": self.rule, "state": self.state}


@dataclass
class MachineRun:
    value: Value
    steps: int
    trace: list[TraceEvent]


MACHINES = ("convertible", "cps", "lazy")


def initial_state(kind: str, prog) -> HeadState:
    return HeadState(prog.main, Continuation() if kind == "cps" else Context(), {})


def run_machine(kind: str, prog, fuel: int = DEFAULT_FUEL, *, trace: bool = True) -> MachineRun:
    """Run from ``<main, empty stack, {}>`` until Done.

    ``kind`` is ``convertible`` or ``lazy`` (a ConvProgram) or ``cps`` (a
    CpsProgram).  Each rule application, the final one included, counts as
    one step.
    """
    if kind not in MACHINES:
        raise ValueError(f"unknown machine {kind!r}")
    s: MachineState = initial_state(kind, prog)
    events: list[TraceEvent] = []
    steps = 0
    while not isinstance(s, Done):
        if steps >= fuel:
            raise MachineError("FUEL_EXHAUSTED", f"no value after {fuel} steps", steps)
        try:
            if kind == "cps":
                rule, s = fire_cps(s, prog)
            else:
                rule, s = fire_convertible(s, prog, lazy=kind == "lazy")
        except MachineError as err:
            err.step = steps + 1
            raise
        steps += 1
        if trace:
            events.append(TraceEvent(steps, rule, state_to_json(s)))
    return MachineRun(s.v, steps, events)


# --------------------------------------------------------------------------
# Lock-step comparison


def relate(conv: MachineState, cps: MachineState) -> bool:
    """Whether a convertible state and a CPS state correspond."""
    if isinstance(conv, Done) or isinstance(cps, Done):
        return isinstance(conv, Done) and isinstance(cps, Done) and conv.v == cps.v
    if isinstance(conv, HeadState) and isinstance(cps, HeadState):
        return (
            cps_convert(conv.t) == cps.t
            and convert_context(conv.k) == cps.k
            and dict(conv.sigma) == dict(cps.sigma)
        )
    if isinstance(conv, TailState) and isinstance(cps, TailState):
        return convert_tail(conv.q) == cps.q and convert_context(conv.k) == cps.k
    return False


@dataclass
class BisimReport:
    lockstep: bool
    divergence_step: Optional[int] = None
    steps: int = 0
    value: Optional[Value] = None
    error: Optional[str] = None
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "lockstep": self.lockstep,
            "divergence_step": self.divergence_step,
            "steps": self.steps,
            "value": None if self.value is None else str(self.value),
            "error": self.error,
            "detail": self.detail,
        }


def bisim_check(p: ConvProgram, fuel: int = DEFAULT_FUEL) -> BisimReport:
    """Run the convertible machine on ``p`` and the CPS machine on its
    conversion side by side, checking that states correspond at each step
    and that both fire rules with the same number."""
    cp = convert_program(p)
    a: MachineState = initial_state("convertible", p)
    b: MachineState = initial_state("cps", cp)
    steps = 0
    if not relate(a, b):
        return BisimReport(False, 0, 0, detail="initial states differ")
    while not isinstance(a, Done):
        if steps >= fuel:
            return BisimReport(True, None, steps, error="FUEL_EXHAUSTED")
        errors = []
        try:
            ra, a2 = fire_convertible(a, p)
        except MachineError as err:
            errors.append(err.code)
            ra, a2 = None, None
        try:
            rb, b2 = fire_cps(b, cp)
        except MachineError as err:
            errors.append(err.code)
            rb, b2 = None, None
        steps += 1
        if errors:
            same = len(errors) == 2 and errors[0] == errors[1]
            return BisimReport(
                same, None if same else steps, steps, error=errors[0],
                detail="" if same else "only one machine failed",
            )
        if ra != rb:
            return BisimReport(False, steps, steps, detail=f"rule {ra} against rule {rb}")
        if not relate(a2, b2):
            return BisimReport(False, steps, steps, detail=f"states differ after rule {ra}")
        a, b = a2, b2
    return BisimReport(True, None, steps, value=a.v)
