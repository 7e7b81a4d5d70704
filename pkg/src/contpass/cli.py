"""Command-line entry point: ``contpass <command> ...``.

Exit status is 0 on success, 1 when the input has diagnostics or a check
fails, and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence, TextIO

from . import __version__
from .bigstep import DEFAULT_FUEL, EVALUATORS, FAULTS, MONITORS, EvalError
from .cps import (
    ConversionError,
    ConvProgram,
    NotWellFormed,
    convert_program,
    invert_program,
    parse_cps_program,
    pretty_conv_program,
    pretty_cps_program,
    program_well_formed,
    to_convertible,
)
from .generate import GenConfig
from .harness import SCHEMA, check_cps, check_early_eval, check_lifting, diff_eval
from .lifting import (
    LiftError,
    all_targets,
    check_liftable,
    float_blocks,
    lift_all,
    make_target,
    rename_params,
)
from .machines import MACHINES, MachineError, bisim_check, run_machine
from .parser import ParseError, parse_term, validate
from .terms import Term, pretty_print

OK, FAILED, USAGE = 0, 1, 2


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as err:
        print(f"contpass: cannot read {path}: {err.strerror}", file=sys.stderr)
        raise _Exit(USAGE) from None


def _fail(lines: Sequence[str]) -> None:
    for line in lines:
        print(line, file=sys.stderr)
    raise _Exit(FAILED)


def _load(path: str) -> Term:
    try:
        t = parse_term(_read(path))
    except ParseError as err:
        _fail([d.render() for d in err.diagnostics])
    diags = validate(t)
    if diags:
        _fail([d.render() for d in diags])
    return t


def _convertible(path: str) -> ConvProgram:
    try:
        return to_convertible(float_blocks(lift_all(_load(path))))
    except LiftError as err:
        _fail([str(err)])
    except ConversionError as err:
        _fail([d.render() for d in err.diagnostics])
    raise AssertionError("unreachable")


def _load_program(path: str, kind: str):
    """A ConvProgram from source text, or from CPS text when ``kind`` is cps."""
    if kind == "term":
        return _convertible(path)
    try:
        cp = parse_cps_program(_read(path))
    except ParseError as err:
        _fail([d.render() for d in err.diagnostics])
    try:
        return invert_program(cp)
    except NotWellFormed as err:
        _fail([f"NOT_WELL_FORMED: {err}"])
    raise AssertionError("unreachable")


def _open_trace(path: Optional[str]) -> Optional[TextIO]:
    if path is None:
        return None
    if path == "-":
        return sys.stderr
    return open(path, "w", encoding="utf-8")


# --------------------------------------------------------------------------
# Commands


def cmd_parse(args) -> int:
    print(pretty_print(_load(args.file)))
    return OK


def cmd_eval(args) -> int:
    t = _load(args.file)
    out = _open_trace(args.trace)
    trace = (lambda ev: print(json.dumps(ev), file=out)) if out else None
    kwargs = {"monitors": args.monitor, "trace": trace}
    if args.fault:
        if args.semantics == "naive":
            print("contpass: faults only apply to the split semantics", file=sys.stderr)
            return USAGE
        kwargs["faults"] = args.fault
    try:
        res = EVALUATORS[args.semantics](t, args.fuel, **kwargs)
    except EvalError as err:
        _fail([str(err)])
    finally:
        if out not in (None, sys.stderr):
            out.close()
    store = ", ".join(f"l{loc}: {v}" for loc, v in sorted(res.final_store.items()))
    print(res.value)
    print(f"store: {{{store}}}")
    print(f"steps: {res.stats.steps}")
    return OK


def cmd_lift(args) -> int:
    t = _load(args.file)
    try:
        lifted = lift_all(t)
    except LiftError as err:
        _fail([str(err)])
    print(pretty_print(rename_params(lifted) if args.rename else lifted))
    return OK


def cmd_check_liftable(args) -> int:
    t = _load(args.file)
    if args.param is None:
        targets = all_targets(t)
    else:
        try:
            targets = [make_target(t, args.param, args.owner)]
        except LiftError as err:
            _fail([str(err)])
    reports = [check_liftable(t, target) for target in targets]
    if args.json:
        print(json.dumps({"schema": SCHEMA, "reports": [r.to_json() for r in reports]}, indent=2))
    else:
        for r in reports:
            g = r.target
            verdict = "liftable" if r.liftable else "not liftable"
            inner = ", ".join(sorted(g.inner_funs)) or "none"
            print(f"{g.param} of {g.owner}: {verdict} (inner functions: {inner})")
            for span, reason in r.violations:
                where = f"{span.line}:{span.column}: " if span is not None else ""
                print(f"  {where}{reason}")
    return OK if all(r.liftable for r in reports) else FAILED


def cmd_float(args) -> int:
    try:
        prog = float_blocks(lift_all(_load(args.file)))
    except LiftError as err:
        _fail([str(err)])
    print(prog.pretty())
    return OK


def cmd_to_cps(args) -> int:
    print(pretty_cps_program(convert_program(_convertible(args.file))), end="")
    return OK


def cmd_from_cps(args) -> int:
    print(pretty_conv_program(_load_program(args.file, "cps")), end="")
    return OK


def cmd_run_machine(args) -> int:
    prog = _load_program(args.file, args.input)
    if args.machine == "cps":
        prog = convert_program(prog)
        if not program_well_formed(prog):
            _fail(["NOT_WELL_FORMED: the program has a stuck queue"])
    try:
        res = run_machine(args.machine, prog, args.fuel, trace=args.trace is not None)
    except MachineError as err:
        _fail([str(err)])
    out = _open_trace(args.trace)
    if out is not None:
        for ev in res.trace:
            print(json.dumps(ev.to_json()), file=out)
        if out is not sys.stderr:
            out.close()
    print(res.value)
    print(f"steps: {res.steps}")
    return OK


def cmd_bisim(args) -> int:
    report = bisim_check(_load_program(args.file, args.input), args.fuel)
    if args.json:
        print(json.dumps({"schema": SCHEMA, **report.to_json()}, indent=2))
    elif report.lockstep:
        print(f"lock-step for {report.steps} steps, value {report.value}")
    else:
        print(f"diverged at step {report.divergence_step}: {report.detail}")
    return OK if report.lockstep and report.error is None else FAILED


_CHECKS = {
    "general": ("diff-eval",),
    "liftable": ("check-lifting",),
    "convertible": ("check-early-eval", "check-cps"),
}


def cmd_fuzz(args) -> int:
    cfg = GenConfig(
        seed=args.seed, max_depth=args.max_depth, max_funs=args.max_funs,
        max_arity=args.max_arity, mode=args.mode,
    )
    if args.fault and args.mode == "convertible":
        print("contpass: faults only apply to the general and liftable modes", file=sys.stderr)
        return USAGE
    reports = []
    for name in _CHECKS[args.mode]:
        if name == "diff-eval":
            reports.append(diff_eval(cfg, args.count, args.fuel, faults=args.fault))
        elif name == "check-lifting":
            reports.append(check_lifting(cfg, args.count, args.fuel, faults=args.fault))
        elif name == "check-early-eval":
            reports.append(check_early_eval(cfg, args.count, args.fuel))
        else:
            reports.append(check_cps(cfg, args.count, args.fuel))
    if args.json:
        print(json.dumps({"schema": SCHEMA, "reports": [r.to_json() for r in reports]}, indent=2))
    else:
        for r in reports:
            print(r.summary())
            for f in sorted(r.failures, key=lambda f: f.index):
                print(f"  #{f.index} seed {f.seed}: {f.prop}: {f.details}")
                print(f"    {f.term}")
    return OK if all(r.ok for r in reports) else FAILED


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="contpass", description="Lambda-lifting, CPS conversion and reference semantics."
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name: str, fn, help_: str, file: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        if file:
            p.add_argument("file", help="source file, or - for standard input")
        p.set_defaults(run=fn)
        return p

    command("parse", cmd_parse, "parse, validate and pretty-print a term")

    p = command("eval", cmd_eval, "evaluate a term with one of the big-step semantics")
    p.add_argument("--semantics", choices=sorted(EVALUATORS), default="naive")
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument("--trace", nargs="?", const="-", metavar="PATH",
                   help="write one JSON object per rule (default: standard error)")
    p.add_argument("--monitor", action="append", choices=sorted(MONITORS), default=[])
    p.add_argument("--fault", action="append", choices=sorted(FAULTS), default=[])

    p = command("lift", cmd_lift, "lift every parameter used by a nested function")
    p.add_argument("--rename", action="store_true", help="give lifted parameters fresh names")

    p = command("check-liftable", cmd_check_liftable, "report whether parameters are liftable")
    p.add_argument("--param")
    p.add_argument("--owner")
    p.add_argument("--json", action="store_true")

    command("float", cmd_float, "lift, then hoist every function to the top level")
    command("to-cps", cmd_to_cps, "lift, float and convert to CPS")
    command("from-cps", cmd_from_cps, "convert a CPS program back to convertible form")

    for name, fn, help_ in (
        ("run-machine", cmd_run_machine, "run a program on a small-step machine"),
        ("bisim", cmd_bisim, "run both machines in lock-step"),
    ):
        p = command(name, fn, help_)
        p.add_argument("--input", choices=("term", "cps"), default="term",
                       help="read a source term (default) or a CPS program")
        p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
        if name == "run-machine":
            p.add_argument("--machine", choices=MACHINES, default="convertible")
            p.add_argument("--trace", nargs="?", const="-", metavar="PATH")
        else:
            p.add_argument("--json", action="store_true")

    p = command("fuzz", cmd_fuzz, "differential testing on generated programs", file=False)
    p.add_argument("--mode", choices=("general", "liftable", "convertible"), default="general")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--max-funs", type=int, default=3)
    p.add_argument("--max-arity", type=int, default=2)
    p.add_argument("--fault", action="append", choices=sorted(FAULTS), default=[])
    p.add_argument("--json", action="store_true")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "param", None) is not None and getattr(args, "owner", None) is None:
        print("contpass: --param needs --owner", file=sys.stderr)
        return USAGE
    try:
        return args.run(args)
    except _Exit as ex:
        return ex.code
    except ValueError as err:
        print(f"contpass: {err}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
