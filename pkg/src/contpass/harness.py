"""Differential and property checks over generated programs, plus shrinking.

Each ``check_*`` driver draws ``count`` samples from a :class:`GenConfig`
and returns a :class:`DiffReport`.  A sample on which any run exhausts its
fuel is counted as skipped, never as a disagreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Collection, Iterator, Optional

from .bigstep import (
    DEFAULT_FUEL,
    CallEvent,
    EvalError,
    eval_intermediate,
    eval_naive,
    eval_optimised,
    store_leq,
)
from .cps import (
    ConversionError,
    ConvProgram,
    convert_program,
    invert_program,
    program_well_formed,
    to_convertible,
    unfloat,
)
from .generate import GenConfig, gen_conv_program, gen_term, sample_seeds
from .lifting import (
    CaptureMonitor,
    LiftError,
    _replace_at,
    _walk,
    all_targets,
    check_liftable,
    float_blocks,
    lift_all,
    lifted_params,
)
from .machines import MachineError, bisim_check, run_machine
from .parser import validate
from .terms import (
    FALSE,
    TRUE,
    UNIT,
    Call,
    E,
    Int,
    LetRec,
    Lit,
    Term,
    children,
    pretty_print,
    size,
)

SCHEMA = "contpass-report/1"
ALL_MONITORS = ("aliasing", "compact", "fresh")


class _Skip(Exception):
    pass


@dataclass(frozen=True)
class Failure:
    """One failing sample.  ``prop`` names every property it broke, joined
    by ``"; "``, and ``details`` lines up with it."""

    index: int
    seed: int
    term: str
    prop: str
    details: str

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "seed": self.seed,
            "term": self.term,
            "property": self.prop,
            "details": self.details,
        }


@dataclass
class DiffReport:
    name: str
    total: int = 0
    agreed: int = 0
    skipped_fuel: int = 0
    failures: list[Failure] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures

    def bump(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "check": self.name,
            "total": self.total,
            "agreed": self.agreed,
            "skipped_fuel": self.skipped_fuel,
            "failures": [f.to_json() for f in sorted(self.failures, key=lambda f: f.index)],
            "counters": dict(sorted(self.counters.items())),
        }

    def summary(self) -> str:
        return (
            f"{self.name}: {self.total} samples, {self.agreed} agreed, "
            f"{self.skipped_fuel} skipped (fuel), {len(self.failures)} failed"
        )


def _drive(
    name: str,
    cfg: GenConfig,
    count: int,
    make: Callable[[GenConfig], object],
    show: Callable[[object], str],
    check: Callable[[object, DiffReport], list[tuple[str, str]]],
) -> DiffReport:
    report = DiffReport(name)
    for i, seed in enumerate(sample_seeds(cfg.seed, count)):
        sample = make(replace(cfg, seed=seed))
        report.total += 1
        try:
            problems = check(sample, report)
        except _Skip:
            report.skipped_fuel += 1
            continue
        if problems:
            props = "; ".join(p for p, _ in problems)
            details = "; ".join(d for _, d in problems)
            report.failures.append(Failure(i, seed, show(sample), props, details))
        else:
            report.agreed += 1
    return report


def _outcome(run: Callable[[], object]) -> object:
    """The value of a run, or its error code; fuel exhaustion skips."""
    try:
        return run()
    except EvalError as err:
        if err.code == "FUEL_EXHAUSTED":
            raise _Skip() from None
        return err


def _show(o) -> str:
    if isinstance(o, EvalError):
        return f"error {o.code}"
    return str(o.value) if hasattr(o, "value") else str(o)


def _same(a, b) -> bool:
    if isinstance(a, EvalError) or isinstance(b, EvalError):
        return isinstance(a, EvalError) and isinstance(b, EvalError) and a.code == b.code
    return a.value == b.value


# --------------------------------------------------------------------------
# Equivalence of the three big-step evaluators


def compare_evaluators(
    t: Term, fuel: int = DEFAULT_FUEL, faults: Collection[str] = ()
) -> list[tuple[str, str]]:
    naive = _outcome(lambda: eval_naive(t, fuel))
    inter = _outcome(lambda: eval_intermediate(t, fuel, faults=faults))
    opt = _outcome(lambda: eval_optimised(t, fuel, faults=faults))
    problems = []
    if not _same(naive, inter):
        problems.append(("naive=intermediate", f"{_show(naive)} vs {_show(inter)}"))
    if not _same(naive, opt):
        problems.append(("naive=optimised", f"{_show(naive)} vs {_show(opt)}"))
    for name, o in (("intermediate", inter), ("optimised", opt)):
        if not isinstance(o, EvalError) and o.final_store:
            problems.append((f"{name} store empty", f"final store has {len(o.final_store)} locations"))
    return problems


def diff_eval(
    cfg: GenConfig,
    count: int,
    fuel: int = DEFAULT_FUEL,
    *,
    faults: Collection[str] = (),
) -> DiffReport:
    """Naive, intermediate and optimised evaluation agree on every sample,
    and the latter two leave an empty store."""
    return _drive(
        "diff-eval", cfg, count, gen_term, pretty_print,
        lambda t, _: compare_evaluators(t, fuel, faults),
    )


# --------------------------------------------------------------------------
# Lambda-lifting


def lifting_problems(
    t: Term,
    fuel: int = DEFAULT_FUEL,
    faults: Collection[str] = (),
    report: Optional[DiffReport] = None,
) -> list[tuple[str, str]]:
    problems = []
    for target in all_targets(t):
        r = check_liftable(t, target)
        if not r.liftable:
            problems.append(("liftable", f"{target.param} of {target.owner}: {r.violations[0][1]}"))
    if problems:
        return problems
    try:
        lifted = lift_all(t)
    except LiftError as err:
        return [("lift_all", str(err))]
    diags = validate(lifted, shadow_ok=lifted_params(lifted))
    if diags:
        problems.append(("lifted term validates", diags[0].render()))

    leq_breaks: list[str] = []

    def frame_local(ev: CallEvent) -> None:
        if ev.kind == "return" and not store_leq(ev.pre_store, ev.store):
            leq_breaks.append(f"call to {ev.f} at step {ev.step}")

    monitor = CaptureMonitor([g for g in all_targets(t) if g.inner_funs])
    before = _outcome(lambda: eval_naive(t, fuel))
    after = _outcome(lambda: eval_naive(lifted, fuel, observer=frame_local))
    opt_before = _outcome(
        lambda: eval_optimised(t, fuel, ALL_MONITORS, faults=faults, observer=monitor)
    )
    opt_after = _outcome(lambda: eval_optimised(lifted, fuel, ALL_MONITORS, faults=faults))
    if not _same(before, after):
        problems.append(("naive preserved", f"{_show(before)} vs {_show(after)}"))
    for name, o in (("optimised", opt_before), ("optimised lifted", opt_after)):
        if isinstance(o, EvalError) and o.code == "MONITOR_VIOLATION":
            problems.append((f"{name} monitors", o.message))
        elif not _same(before, o):
            problems.append((f"{name} preserved", f"{_show(before)} vs {_show(o)}"))
        elif not isinstance(o, EvalError) and o.final_store:
            problems.append((f"{name} store empty", f"final store has {len(o.final_store)} locations"))
    if monitor.occurrences:
        step, owner, x = monitor.occurrences[0]
        problems.append(("lifted parameter not captured", f"{x} of {owner} captured at step {step}"))
    if leq_breaks:
        problems.append(("calls extend the store", leq_breaks[0]))
    if report is not None:
        report.bump("capture_checks", monitor.checked)
        report.bump("capture_occurrences", len(monitor.occurrences))
        report.bump("lifted_samples", int(lifted != t))
    return problems


def check_lifting(
    cfg: GenConfig,
    count: int,
    fuel: int = DEFAULT_FUEL,
    *,
    faults: Collection[str] = (),
) -> DiffReport:
    """Lifting every parameter preserves the value under naive and monitored
    optimised evaluation; no monitor fires and no lifted parameter stays
    captured in the lifted function environments."""
    cfg = replace(cfg, mode="liftable")
    return _drive(
        "check-lifting", cfg, count, gen_term, pretty_print,
        lambda t, rep: lifting_problems(t, fuel, faults, rep),
    )


# --------------------------------------------------------------------------
# Convertible programs and the machines


def _machine(kind: str, prog, fuel: int):
    try:
        return run_machine(kind, prog, fuel, trace=False)
    except MachineError as err:
        if err.code == "FUEL_EXHAUSTED":
            raise _Skip() from None
        return err


def early_eval_problems(
    p: ConvProgram, fuel: int = DEFAULT_FUEL, source: Optional[Term] = None
) -> list[tuple[str, str]]:
    """``source`` is the term ``p`` was floated from; by default the nested
    form of ``p`` itself."""
    term = unfloat(p) if source is None else source
    eager = _machine("convertible", p, fuel)
    lazy = _machine("lazy", p, fuel)
    naive = _outcome(lambda: eval_naive(term, fuel))
    problems = []
    if not _same(eager, lazy):
        problems.append(("early = lazy", f"{_show(eager)} vs {_show(lazy)}"))
    if not _same(lazy, naive):
        problems.append(("lazy = naive", f"{_show(lazy)} vs {_show(naive)}"))
    return problems


def check_early_eval(cfg: GenConfig, count: int, fuel: int = DEFAULT_FUEL) -> DiffReport:
    """Substituting the frame store into a whole tail before unfolding it
    gives the same value as reading variables when each frame is pushed."""
    cfg = replace(cfg, mode="convertible")
    return _drive(
        "check-early-eval", cfg, count, gen_conv_program,
        lambda p: pretty_print(unfloat(p)), lambda p, _: early_eval_problems(p, fuel),
    )


def cps_problems(
    p: ConvProgram, fuel: int = DEFAULT_FUEL, source: Optional[Term] = None
) -> list[tuple[str, str]]:
    """As :func:`early_eval_problems`, ``source`` defaults to ``unfloat(p)``."""
    problems = []
    cp = convert_program(p)
    if not program_well_formed(cp):
        problems.append(("well-formed", "the converted program has a stuck queue"))
    elif invert_program(cp) != p:
        problems.append(("invert . convert = id", "inverting the conversion changed the program"))
    term = unfloat(p) if source is None else source
    try:
        if to_convertible(float_blocks(lift_all(term))) != p:
            problems.append(("pipeline", "lift, float and recognise did not give the program back"))
    except (ConversionError, LiftError) as err:
        problems.append(("pipeline", str(err)))
    bisim = bisim_check(p, fuel)
    if bisim.error == "FUEL_EXHAUSTED":
        raise _Skip()
    if not bisim.lockstep:
        problems.append(("lock-step", f"diverged at step {bisim.divergence_step}: {bisim.detail}"))
    conv = _machine("convertible", p, fuel)
    cps = _machine("cps", cp, fuel)
    naive = _outcome(lambda: eval_naive(term, fuel))
    if not _same(conv, cps) or (not isinstance(conv, MachineError) and conv.steps != cps.steps):
        problems.append(("machines agree", f"{_show(conv)} vs {_show(cps)}"))
    if not _same(conv, naive):
        problems.append(("machine = naive", f"{_show(conv)} vs {_show(naive)}"))
    return problems


def check_cps(cfg: GenConfig, count: int, fuel: int = DEFAULT_FUEL) -> DiffReport:
    """CPS conversion is a well-formed bijection and the two machines run in
    lock-step, agreeing with naive evaluation of the nested program."""
    cfg = replace(cfg, mode="convertible")
    return _drive(
        "check-cps", cfg, count, gen_conv_program,
        lambda p: pretty_print(unfloat(p)), lambda p, _: cps_problems(p, fuel),
    )


# --------------------------------------------------------------------------
# Shrinking

_LITERALS = (E(Lit(Int(0))), E(Lit(TRUE)), E(Lit(FALSE)), E(Lit(UNIT)))


def _drop_arg(t: Term, f: str, i: int) -> Term:
    if isinstance(t, E):
        return t
    kids = [_drop_arg(c, f, i) for c in children(t)]
    if isinstance(t, LetRec):
        params = t.params[:i] + t.params[i + 1:] if t.f == f else t.params
        return LetRec(t.f, params, kids[0], kids[1], t.span)
    if isinstance(t, Call):
        if t.f == f:
            kids = kids[:i] + kids[i + 1:]
        return Call(t.f, tuple(kids), t.span)
    out = t
    for j, k in enumerate(kids):
        out = _replace_at(out, (j,), k)
    return out


def shrink_candidates(t: Term) -> Iterator[Term]:
    nodes = list(_walk(t))
    for at, u in nodes:
        for lit in _LITERALS:
            if u != lit:
                yield _replace_at(t, at, lit)
    for at, u in nodes:
        for c in children(u):
            yield _replace_at(t, at, c)
    for at, u in nodes:
        if isinstance(u, LetRec):
            yield _replace_at(t, at, u.cont)
            for i in range(len(u.params)):
                yield _drop_arg(t, u.f, i)


def shrink(t: Term, failing: Callable[[Term], bool], max_rounds: int = 10_000) -> Term:
    """Greedy shrinking: repeatedly take the first smaller, validator-clean
    candidate on which ``failing`` still holds."""
    for _ in range(max_rounds):
        n = size(t)
        for c in shrink_candidates(t):
            if size(c) >= n or validate(c):
                continue
            try:
                still = failing(c)
            except Exception:
                still = False
            if still:
                t = c
                break
        else:
            return t
    return t


def evaluators_disagree(faults: Collection[str], fuel: int = DEFAULT_FUEL) -> Callable[[Term], bool]:
    """Predicate for :func:`shrink`: some evaluator check fails under ``faults``."""

    def failing(t: Term) -> bool:
        try:
            return bool(compare_evaluators(t, fuel, faults))
        except _Skip:
            return False

    return failing


def contains_call(t: Term) -> bool:
    return any(isinstance(u, Call) for _, u in _walk(t))
