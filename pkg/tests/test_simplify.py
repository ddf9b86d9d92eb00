import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birlift import randgen
from birlift.core import has_subst
from birlift.fixtures import chain_program
from birlift.simplify import (
    SimplifyError,
    TautologyGoal,
    equisatisfiable_oracle,
    naive_expansion_stats,
    push_subst,
    simplify,
    simplify_with_types,
    size_stats,
)
from birlift.syntax import (
    TRUE_E,
    BinOp,
    BinOpKind,
    Reg,
    Subst,
    Var,
    Word,
    c,
    eq,
    implies,
    land,
)
from birlift.wp import wp_fragment

X, Y, Z = Var("X"), Var("Y"), Var("Z")
TYPES8 = {"X": Reg(8), "Y": Reg(8), "Z": Reg(8)}
REG8 = [Word(8, v) for v in range(256)]


def add(a, b):
    return BinOp(BinOpKind.ADD, a, b)


Q = eq(Z, BinOp(BinOpKind.MUL, X, c(8, 4)))
WORKED = Subst(add(X, X), "Y", Subst(add(Y, Y), "Z", Q))


def test_worked_example_shape():
    res = simplify_with_types(TautologyGoal(TRUE_E, WORKED), TYPES8)
    y1, z1 = Var("Y_1"), Var("Z_1")
    assert res.conclusion == implies(
        eq(y1, add(X, X)), implies(eq(z1, add(y1, y1)), eq(z1, BinOp(BinOpKind.MUL, X, c(8, 4))))
    )
    assert [a.name for a in res.fresh] == ["Y_1", "Z_1"]
    assert res.fresh_types == {"Y_1": Reg(8), "Z_1": Reg(8)}


def test_worked_example_oracle():
    res = simplify_with_types(TautologyGoal(TRUE_E, WORKED), TYPES8)
    dom = {"X": REG8, "Y": [Word(8, 0)], "Z": [Word(8, 0)]}
    out = equisatisfiable_oracle(TRUE_E, WORKED, res.conclusion, dom, res.fresh)
    assert out and out.premise_implies_original and out.envs == 256


def test_worked_example_oracle_full_fresh_domain():
    # every fresh valuation, over a slice of X
    res = simplify_with_types(TautologyGoal(TRUE_E, WORKED), TYPES8)
    dom = {"X": REG8[::37], "Y": [Word(8, 0)], "Z": [Word(8, 0)]}
    fresh = {"Y_1": REG8, "Z_1": REG8[::3]}
    assert equisatisfiable_oracle(TRUE_E, WORKED, res.conclusion, dom, res.fresh, fresh)


def test_drop_rule():
    goal = TautologyGoal(TRUE_E, Subst(add(X, X), "W", eq(Y, Z)))
    assert simplify(goal) == eq(Y, Z)


def test_no_subst_is_unchanged():
    assert simplify(TautologyGoal(TRUE_E, Q)) is Q


def test_ill_typed_goal_rejected():
    with pytest.raises(SimplifyError):
        simplify(TautologyGoal(TRUE_E, X), TYPES8)


def test_conjunction_and_implication_recurse():
    a = Subst(X, "Y", eq(Y, Z))
    out = simplify(TautologyGoal(TRUE_E, land(implies(eq(X, Z), a), a)))
    assert not has_subst(out)
    assert out.op == BinOpKind.LAND and out.left.op == BinOpKind.IMPLIES


# -- push_subst --------------------------------------------------------------------


def test_push_subst_cases():
    e, b = add(X, Var("v")), eq(Var("v"), Y)
    assert push_subst("v", "v1", Var("v")) == Var("v1")
    # shadowed: only the replacement is renamed
    assert push_subst("v", "v1", Subst(e, "v", b)) == Subst(add(X, Var("v1")), "v", b)
    assert push_subst("v", "v1", Subst(e, "w", b)) == Subst(add(X, Var("v1")), "w", eq(Var("v1"), Y))


# -- growth --------------------------------------------------------------------------


def chain_goal(n):
    h = wp_fragment(chain_program(n), {0: eq(Var(f"Y{n}"), c(8, 0))}, ["entry"])
    return TautologyGoal(TRUE_E, h["entry"])


@pytest.mark.parametrize("n", [5, 10, 15])
def test_chain_is_linear_and_naive_is_exponential(n):
    goal = chain_goal(n)
    out = simplify(goal)
    assert not has_subst(out)
    assert size_stats(out).tree_nodes == 6 * n + 3
    assert naive_expansion_stats(goal.conclusion).var_occurrences == 2**n


# -- random goals ---------------------------------------------------------------------

SMALL = {"B0": Reg(1), "X": Reg(8), "Y": Reg(8)}
SMALL_DOMAIN = {"B0": [Word(1, 0), Word(1, 1)], "X": REG8[::17], "Y": REG8[::51]}


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32))
def test_simplify_preserves_meaning(seed):
    rng = random.Random(seed)
    p, p1 = randgen.random_goal(rng, SMALL, max_substs=4, depth=3)
    res = simplify_with_types(TautologyGoal(p, p1), SMALL)
    assert not has_subst(res.conclusion)
    out = equisatisfiable_oracle(p, p1, res.conclusion, SMALL_DOMAIN, res.fresh)
    assert out, out.counterexample
