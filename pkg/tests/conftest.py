from __future__ import annotations

import sys
from pathlib import Path

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from contpass.bigstep import Closure, FunEnv, VarEnv  # noqa: E402
from contpass.generate import GenConfig, gen_term  # noqa: E402
from contpass.terms import (  # noqa: E402
    BINOPS,
    FALSE,
    TRUE,
    UNIT,
    Assign,
    BinOp,
    Call,
    E,
    If,
    Int,
    LetRec,
    Lit,
    Seq,
    Var,
)

settings.register_profile(
    "repo", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("repo")

NAMES = ("a", "b", "x", "y", "f", "g", "h", "k")

values = st.one_of(
    st.just(UNIT), st.sampled_from([TRUE, FALSE]), st.integers(-50, 50).map(Int)
)

exprs = st.recursive(
    st.one_of(values.map(Lit), st.sampled_from(NAMES).map(Var)),
    lambda sub: st.builds(BinOp, st.sampled_from(sorted(BINOPS)), sub, sub),
    max_leaves=6,
)


def _compound(sub):
    return st.one_of(
        st.builds(Assign, st.sampled_from(NAMES), sub),
        st.builds(If, sub, sub, sub),
        st.builds(Seq, sub, sub),
        st.builds(
            LetRec,
            st.sampled_from(NAMES),
            st.lists(st.sampled_from(NAMES), max_size=3, unique=True).map(tuple),
            sub,
            sub,
        ),
        st.builds(Call, st.sampled_from(NAMES), st.lists(sub, max_size=3).map(tuple)),
    )


# Arbitrary syntax, not necessarily closed.
raw_terms = st.recursive(exprs.map(E), _compound, max_leaves=12)

seeds = st.integers(0, 2**64 - 1)


def generated(mode: str = "general", **kw):
    """Closed terms from the package generator, one per drawn seed."""
    return seeds.map(lambda s: gen_term(GenConfig(seed=s, mode=mode, **kw)))


locations = st.integers(1, 12)
stores = st.dictionaries(locations, values, max_size=8)
var_envs = st.lists(st.tuples(st.sampled_from(NAMES), locations), max_size=5).map(
    lambda es: VarEnv(tuple(es))
)


def _closure(funs):
    return st.builds(
        Closure,
        st.lists(st.sampled_from(NAMES), max_size=3, unique=True).map(tuple),
        st.just(E(Lit(UNIT))),
        var_envs,
        funs,
    )


fun_envs = st.recursive(
    st.just(FunEnv()),
    lambda sub: st.dictionaries(st.sampled_from(NAMES), _closure(sub), max_size=3).map(FunEnv),
    max_leaves=6,
)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
