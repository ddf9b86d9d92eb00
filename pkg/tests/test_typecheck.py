import random

import pytest

from birlift import randgen
from birlift.fixtures import pop_push_program
from birlift.sem import BirState, weak_exec
from birlift.syntax import (
    TYPE_ERROR,
    Assert,
    Assign,
    Block,
    Const,
    DuplicateLabelError,
    Jmp,
    Mem,
    Memory,
    Program,
    Reg,
    Subst,
    Var,
    Word,
    c,
)
from birlift.typecheck import ProgramTypeError, check_env, check_program, diagnose_program


def one_block(*stmts, cf=None):
    return Program((Block(0, tuple(stmts), cf or Jmp(c(64, 4))),))


def test_pop_push_context():
    ctx = check_program(pop_push_program())
    assert dict(ctx.types) == {"R1": Reg(32), "SP": Reg(32), "MEM": Mem(32)}
    assert ctx.labels == {0x400000, 0x400004}


def test_conflicting_types():
    p = one_block(Assign("x", Const(1, 1)), Assign("x", c(8, 1)))
    with pytest.raises(ProgramTypeError) as info:
        check_program(p)
    assert any("conflicting types" in d.message for d in info.value.diagnostics)


def test_assert_condition_must_be_reg1():
    _, diags = diagnose_program(one_block(Assert(c(8, 1))))
    assert [(d.label, d.index, d.message) for d in diags] == [(0, 0, "condition must be Reg1")]


def test_subst_not_allowed_in_statements():
    p = one_block(Assign("x", Subst(c(8, 1), "y", Var("y"))))
    _, diags = diagnose_program(p, {"x": Reg(8), "y": Reg(8)})
    assert "explicit substitution" in diags[0].message


def test_jump_target_typing():
    p = one_block(cf=Jmp(Var("m")))
    _, diags = diagnose_program(p, {"m": Mem(32)})
    assert diags and "jump target" in diags[0].message


def test_duplicate_labels_rejected():
    b = Block(0, (), Jmp(c(64, 0)))
    with pytest.raises(DuplicateLabelError):
        Program((b, b))


def test_check_env():
    ctx = {"R1": Reg(32)}
    assert check_env({"R1": Word(32, 0)}, ctx)
    assert not check_env({}, {"MEM": Mem(32)})
    assert not check_env({"R1": Word(64, 0)}, ctx)
    assert check_env({"MEM": Memory(32)}, {"MEM": Mem(32)})


def test_diagnostics_render_for_json():
    _, diags = diagnose_program(one_block(Assert(c(8, 1))))
    assert diags[0].to_dict() == {"label": "0x0", "index": 0, "message": "condition must be Reg1"}


def test_random_programs_typecheck_and_never_type_error(backend):
    # The full 10,000-program run lives in the acceptance suite.
    for seed in range(150):
        rng = random.Random(seed)
        p, exits = randgen.random_program(rng)
        ctx = check_program(p, randgen.DEFAULT_TYPES)
        env = randgen.random_env(rng, ctx.types)
        assert check_env(env, ctx)
        res = weak_exec(p, BirState(env, p.blocks[0].label), frozenset(exits), 2000)
        assert getattr(res, "pc", None) is not TYPE_ERROR
