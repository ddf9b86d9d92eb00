"""Removing explicit substitutions from a tautology goal ``P |- P'``.

Rules, applied top-down to the conclusion:

* ``A and B``: simplify both sides.
* ``A => B``: ``A`` joins the premise; simplify ``B``.
* ``{E/v} A`` with ``v`` free in ``A``: pick ``v'`` fresh for the whole goal
  and produce ``(v' = E) => A'`` where ``A'`` is ``A`` with ``v`` renamed to
  ``v'`` (the renaming is pushed through inner substitutions, stopping
  under a substitution that rebinds ``v``); then simplify ``A'``.
* ``{E/v} A`` with ``v`` not free in ``A``: ``A``.
* anything else is a leaf and is kept, except that a leaf still holding a
  substitution (one the rules above cannot reach) is expanded naively.

Each fresh variable abbreviates one substituted expression, so the result
stays linear in the size of the weakest-precondition DAG.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .core import (
    all_names,
    eval_expr,
    expand_substs,
    free_vars,
    fresh_name,
    has_subst,
    node_count,
    rebuild,
    type_of_expr,
    var_occurrences,
)
from .syntax import (
    TRUE,
    TYPE_ERROR,
    BinOp,
    BinOpKind,
    BType,
    Expr,
    Reg,
    Subst,
    Var,
    Word,
    eq,
    implies,
    land,
)


class SimplifyError(Exception):
    pass


@dataclass(frozen=True)
class TautologyGoal:
    premise: Expr
    conclusion: Expr

    def check(self, typing: Mapping[str, BType]) -> None:
        for part, what in ((self.premise, "premise"), (self.conclusion, "conclusion")):
            t = type_of_expr(part, typing)
            if t is not Reg(1):
                raise SimplifyError(f"ill-typed goal: the {what} has type {t!r}, expected Reg1")


@dataclass(frozen=True)
class Abbreviation:
    name: str
    type: BType | None
    expr: Expr


@dataclass
class SimplifyResult:
    conclusion: Expr
    fresh: list[Abbreviation] = field(default_factory=list)

    @property
    def fresh_types(self) -> dict[str, BType]:
        return {a.name: a.type for a in self.fresh if a.type is not None}


def push_subst(v: str, v2: str, e: Expr) -> Expr:
    """Rename free ``v`` to ``v2`` throughout ``e``, through inner substitutions.

    At ``{E/w} B`` the renaming enters ``E`` always and ``B`` only when
    ``w != v``.  ``v2`` must not occur in ``e``.
    """
    memo: dict[int, Expr] = {}
    target = Var(v2)

    def go(x: Expr) -> Expr:
        hit = memo.get(id(x))
        if hit is not None:
            return hit
        if type(x) is Var:
            out = target if x.name == v else x
        elif type(x) is Subst:
            r = go(x.replacement)
            body = x.body if x.var == v else go(x.body)
            out = x if (r is x.replacement and body is x.body) else Subst(r, x.var, body)
        else:
            out = rebuild(x, [go(ch) for ch in x.children()])
        memo[id(x)] = out
        return out

    return go(e)


def simplify_with_types(
    goal: TautologyGoal, typing: Mapping[str, BType] | None = None
) -> SimplifyResult:
    """Substitution-free conclusion plus the fresh abbreviations it introduced."""
    typing = dict(typing or {})
    if typing:
        goal.check(typing)
    avoid = all_names(goal.premise) | all_names(goal.conclusion)
    fresh: list[Abbreviation] = []
    # One result per (node, renaming state) would be unsound to share across
    # different fresh names, so memoise on node identity only within the
    # structural (non-binding) parts.
    memo: dict[int, Expr] = {}

    def go(a: Expr) -> Expr:
        hit = memo.get(id(a))
        if hit is not None:
            return hit
        out = step(a)
        memo[id(a)] = out
        return out

    def step(a: Expr) -> Expr:
        if type(a) is BinOp and a.op == BinOpKind.LAND:
            return land(go(a.left), go(a.right))
        if type(a) is BinOp and a.op == BinOpKind.IMPLIES:
            left = expand_substs(a.left) if has_subst(a.left) else a.left
            return implies(left, go(a.right))
        if type(a) is Subst:
            if a.var not in free_vars(a.body):
                return go(a.body)
            e = expand_substs(a.replacement) if has_subst(a.replacement) else a.replacement
            v2 = fresh_name(avoid, a.var)
            avoid.add(v2)
            t = type_of_expr(e, {**typing, **{f.name: f.type for f in fresh if f.type}}) if typing else None
            if t is TYPE_ERROR:
                raise SimplifyError(f"ill-typed substitution for {a.var}")
            fresh.append(Abbreviation(v2, t, e))
            return implies(eq(Var(v2), e), go(push_subst(a.var, v2, a.body)))
        return expand_substs(a) if has_subst(a) else a

    return SimplifyResult(go(goal.conclusion), fresh)


def simplify(goal: TautologyGoal, typing: Mapping[str, BType] | None = None) -> Expr:
    return simplify_with_types(goal, typing).conclusion


# --------------------------------------------------------------------------
# Measurements


@dataclass(frozen=True)
class SizeStats:
    tree_nodes: int
    dag_nodes: int
    var_occurrences: int
    subst_nodes: int

    def to_dict(self) -> dict:
        return {
            "tree_nodes": self.tree_nodes,
            "dag_nodes": self.dag_nodes,
            "var_occurrences": self.var_occurrences,
            "subst_nodes": self.subst_nodes,
        }


def size_stats(e: Expr) -> SizeStats:
    seen: set[int] = set()
    substs = 0
    stack = [e]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        if type(x) is Subst:
            substs += 1
        stack.extend(x.children())
    return SizeStats(node_count(e), node_count(e, shared=True), var_occurrences(e), substs)


def naive_expansion_stats(e: Expr) -> SizeStats:
    """Sizes of the fully substituted formula, measured without unfolding it."""
    return size_stats(expand_substs(e))


# --------------------------------------------------------------------------
# Brute-force oracle


def _values(t: BType, sample: Sequence[int] | None = None) -> list:
    if t.width == 1:
        return [Word(1, 0), Word(1, 1)]
    if sample is None:
        return [Word(t.width, b) for b in range(1 << t.width)]
    return [Word(t.width, b) for b in sample]


@dataclass
class OracleResult:
    equivalent: bool
    pointwise: bool
    premise_implies_original: bool
    premise_implies_simplified: bool
    envs: int
    counterexample: dict | None = None

    def __bool__(self) -> bool:
        return self.equivalent and self.pointwise


def equisatisfiable_oracle(
    p: Expr,
    p1: Expr,
    p2: Expr,
    domain: Mapping[str, Sequence],
    fresh: Sequence[Abbreviation] = (),
    fresh_domain: Mapping[str, Sequence] | None = None,
) -> OracleResult:
    """Brute-force comparison of ``P |- P'`` (closure semantics) with ``P |- P''``.

    ``P |- P''`` quantifies over the fresh variables too.  With
    ``fresh_domain`` they range over the given values; otherwise each ranges
    over its consistent value (the value of its abbreviated expression) and
    one inconsistent neighbour, or both values for Reg1.  Besides the
    tautology verdicts, the check is pointwise: for every base env,
    ``P => P'`` must equal ``P => P''`` for all fresh valuations.
    """
    names = sorted(domain)
    lhs_all = True
    rhs_all = True
    pointwise = True
    cex = None
    envs = 0
    for combo in itertools.product(*(domain[n] for n in names)):
        env = dict(zip(names, combo))
        envs += 1
        lhs = eval_expr(implies(p, p1), env) == TRUE
        rhs = True
        for ext in _fresh_valuations(env, fresh, fresh_domain):
            if eval_expr(implies(p, p2), ext) != TRUE:
                rhs = False
                break
        lhs_all &= lhs
        rhs_all &= rhs
        if lhs != rhs and pointwise:
            pointwise = False
            cex = {"env": env, "original": lhs, "simplified": rhs}
    return OracleResult(lhs_all == rhs_all, pointwise, lhs_all, rhs_all, envs, cex)


def _fresh_valuations(env, fresh, fresh_domain):
    if not fresh:
        yield env
        return
    if fresh_domain is not None:
        names = [a.name for a in fresh]
        for combo in itertools.product(*(fresh_domain[n] for n in names)):
            yield {**env, **dict(zip(names, combo))}
        return

    def rec(i: int, cur: dict):
        if i == len(fresh):
            yield cur
            return
        a = fresh[i]
        v = eval_expr(a.expr, cur)
        if type(v) is not Word:
            yield from rec(i + 1, cur)
            return
        options = [v, Word(v.width, v.bits ^ 1)]
        for o in options:
            yield from rec(i + 1, {**cur, a.name: o})

    yield from rec(0, dict(env))
