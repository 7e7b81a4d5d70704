"""Reference implementations used only by the tests.

Each oracle is written against the plain definition, independently of the
package code it is compared with, and favours obviousness over speed.
"""

from __future__ import annotations

from itertools import combinations

from contpass.terms import (
    Assign,
    BinOp,
    Call,
    E,
    If,
    LetRec,
    Lit,
    Seq,
    Var,
)


def free_vars_walk(t, bound=frozenset()):
    """Collect variable occurrences while carrying the set of names bound
    by enclosing parameter lists."""
    found = set()

    def expr(e, bound):
        if isinstance(e, Var):
            if e.x not in bound:
                found.add(e.x)
        elif isinstance(e, BinOp):
            expr(e.left, bound)
            expr(e.right, bound)

    def term(t, bound):
        if isinstance(t, E):
            expr(t.e, bound)
        elif isinstance(t, Assign):
            if t.x not in bound:
                found.add(t.x)
            term(t.rhs, bound)
        elif isinstance(t, If):
            for c in (t.cond, t.then, t.else_):
                term(c, bound)
        elif isinstance(t, Seq):
            term(t.first, bound)
            term(t.second, bound)
        elif isinstance(t, LetRec):
            term(t.body, bound | set(t.params))
            term(t.cont, bound)
        elif isinstance(t, Call):
            for a in t.args:
                term(a, bound)

    term(t, frozenset(bound))
    return found


def to_debruijn(t, scopes=()):
    """Nameless form: a bound variable becomes ("b", depth, index) and a free
    one stays ("f", name).  Two terms with the same nameless form differ only
    in the names of bound parameters."""

    def var(x):
        for depth, params in enumerate(reversed(scopes)):
            if x in params:
                return ("b", depth, params.index(x))
        return ("f", x)

    def expr(e):
        if isinstance(e, Lit):
            return ("lit", e.v)
        if isinstance(e, Var):
            return var(e.x)
        return ("op", e.op, expr(e.left), expr(e.right))

    if isinstance(t, E):
        return ("e", expr(t.e))
    if isinstance(t, Assign):
        return ("assign", var(t.x), to_debruijn(t.rhs, scopes))
    if isinstance(t, If):
        return ("if",) + tuple(to_debruijn(c, scopes) for c in (t.cond, t.then, t.else_))
    if isinstance(t, Seq):
        return ("seq", to_debruijn(t.first, scopes), to_debruijn(t.second, scopes))
    if isinstance(t, LetRec):
        return (
            "letrec",
            t.f,
            len(t.params),
            to_debruijn(t.body, scopes + (t.params,)),
            to_debruijn(t.cont, scopes),
        )
    return ("call", t.f, tuple(to_debruijn(a, scopes) for a in t.args))


def subst_debruijn(d, binding):
    """Substitute into a nameless form: only ("f", x) nodes are free."""
    if isinstance(d, tuple) and d[:1] == ("f",) and len(d) == 2 and d[1] in binding:
        return ("lit", binding[d[1]])
    if isinstance(d, tuple):
        return tuple(subst_debruijn(c, binding) for c in d)
    return d


def duplicate_params(t):
    """Parameter names declared by more than one parameter slot."""
    names = []

    def walk(t):
        if isinstance(t, LetRec):
            names.extend(t.params)
            walk(t.body)
            walk(t.cont)
        elif isinstance(t, Assign):
            walk(t.rhs)
        elif isinstance(t, If):
            for c in (t.cond, t.then, t.else_):
                walk(c)
        elif isinstance(t, Seq):
            walk(t.first)
            walk(t.second)
        elif isinstance(t, Call):
            for a in t.args:
                walk(a)

    walk(t)
    return {x for x in names if names.count(x) > 1}


def gc_oracle(env_pairs, store):
    """Restrict ``store`` to the locations not named by ``env_pairs``."""
    keep = set(store) - {loc for _, loc in env_pairs}
    return {l: store[l] for l in keep}


def leq_oracle(s, t):
    """``s`` is ``t`` restricted to ``dom(s)``."""
    return set(s) <= set(t) and {l: t[l] for l in s} == s


def aliasing_oracle(envs):
    """Pairwise scan over every binding of every environment."""
    bindings = [b for env in envs for b in env.entries]
    for (x, l), (y, m) in combinations(bindings, 2):
        if l == m and x != y:
            return False
    return True


def locations_oracle(F):
    """Images of every captured environment, following nested FunEnvs."""
    out = set()
    pending = list(F.entries.values())
    visited = []
    while pending:
        c = pending.pop()
        if any(c is v for v in visited):
            continue
        visited.append(c)
        out |= {loc for _, loc in c.captured_vars.entries}
        pending.extend(c.captured_funs.entries.values())
    return out


def eval_expr_oracle(e, env):
    """Direct interpretation of a pure expression over a dict of ints/bools."""
    if isinstance(e, Lit):
        v = e.v
        return getattr(v, "n", getattr(v, "truth", None))
    if isinstance(e, Var):
        return env[e.x]
    a = eval_expr_oracle(e.left, env)
    b = eval_expr_oracle(e.right, env)
    return {"add": a + b, "sub": a - b, "lt": a < b, "eq": a == b}[e.op]
