import random

import pytest

from birlift import randgen
from birlift.fixtures import pop_push_program
from birlift.sem import BirState, exec_block, exec_stmt, weak_exec, weak_exec_step
from birlift.syntax import (
    DIVERGED,
    FAILED,
    TYPE_ERROR,
    Assert,
    Assign,
    BinOp,
    BinOpKind,
    Block,
    CJmp,
    Const,
    Jmp,
    LabelConst,
    Memory,
    Program,
    Var,
    Word,
    c,
)


def pop_push_env(r1=0x55):
    mem = Memory(32, {0x100: 0xEF, 0x101: 0xBE, 0x102: 0xAD, 0x103: 0xDE})
    return {"SP": Word(32, 0x100), "MEM": mem, "R1": Word(32, r1)}


def test_exec_stmt(backend):
    env = {"SP": Word(32, 0x100)}
    out = exec_stmt(Assign("SP", BinOp(BinOpKind.ADD, Var("SP"), c(32, 4))), env)
    assert out == {"SP": Word(32, 0x104)}
    assert env == {"SP": Word(32, 0x100)}
    assert exec_stmt(Assert(Const(1, 0)), env) is FAILED
    assert exec_stmt(Assert(c(8, 1)), env) is TYPE_ERROR
    # re-binding at a different type is a dynamic type error
    assert exec_stmt(Assign("SP", c(8, 0)), env) is TYPE_ERROR


def test_exec_block_pop_push(backend):
    bs = exec_block(pop_push_program(), BirState(pop_push_env(), 0x400000))
    assert bs.pc == 0x400004
    assert bs.env["R1"] == Word(32, 0xDEADBEEF)
    assert bs.env["SP"] == Word(32, 0x104)


def test_cjmp_and_missing_labels(backend):
    p = Program(
        (
            Block(0, (), CJmp(Var("b"), c(64, 0x10), c(64, 0x20))),
            Block(0x10, (), Jmp(c(64, 0x999))),
            Block(0x20, (), Jmp(LabelConst("nowhere"))),
        )
    )
    assert exec_block(p, BirState({"b": Word(1, 1)}, 0)).pc == 0x10
    assert exec_block(p, BirState({"b": Word(1, 0)}, 0)).pc == 0x20
    assert exec_block(p, BirState({}, 0x10)).pc is FAILED
    assert exec_block(p, BirState({}, 0x20)).pc is FAILED
    assert exec_block(p, BirState({"b": Word(8, 1)}, 0)).pc is TYPE_ERROR


def test_weak_exec_pop_push_restores_sp(backend):
    p = pop_push_program()
    for r1 in (0, 1, 0xFFFFFFFF):
        env = pop_push_env(r1)
        res = weak_exec(p, BirState(env, 0x400000), {0x400008})
        assert res.pc == 0x400008
        assert res.env["SP"] == env["SP"]
        mem, orig = res.env["MEM"], env["MEM"]
        # the push rewrites the popped word just above SP; nothing else moves
        assert mem.load(0x104, 4) == 0xDEADBEEF
        touched = range(0x104, 0x108)
        assert {a: v for a, v in mem.data.items() if a not in touched} == dict(orig.data)


def test_weak_exec_boundaries(backend):
    p = pop_push_program()
    bs = BirState(pop_push_env(), 0x400000)
    assert weak_exec(p, bs, {0x400000}) is bs
    assert weak_exec_step(p, bs, {0x400000}).pc is FAILED  # runs on to 0x400008, not a block
    assert weak_exec_step(p, bs, {0x400004}).pc == 0x400004
    loop = Program((Block("a", (), Jmp(LabelConst("b"))), Block("b", (), Jmp(LabelConst("a")))))
    assert weak_exec(loop, BirState({}, "a"), set(), 100) is DIVERGED
    with pytest.raises(ValueError):
        weak_exec(loop, BirState({}, "a"), set(), 0)


def test_error_absorption(backend):
    bs = BirState({}, FAILED)
    assert weak_exec(pop_push_program(), bs, set()) is bs


def _trace(p, bs, ls, fuel=500):
    """Labels visited by single block steps until ls, error, or exit."""
    out = []
    for _ in range(fuel):
        if bs.is_error or bs.pc in ls or bs.pc not in p.index:
            break
        bs = exec_block(p, bs)
        out.append(bs.pc)
    return out, bs


def test_weak_exec_prefix_property(backend):
    for seed in range(200):
        rng = random.Random(seed)
        p, exits = randgen.random_program(rng)
        env = randgen.random_env(rng, randgen.DEFAULT_TYPES)
        start = BirState(env, p.blocks[0].label)
        ls1 = frozenset(exits)
        ls2 = frozenset(rng.sample(p.labels, k=min(2, len(p.labels))))
        a = weak_exec(p, start, ls1, 500)
        b = weak_exec(p, start, ls1 | ls2, 500)
        if b is DIVERGED:
            assert a is DIVERGED
            continue
        # the run stopping at ls1 | ls2 is a prefix of the run stopping at ls1
        trace, _ = _trace(p, start, ls1 | ls2)
        assert b.pc in ls1 | ls2 or b.is_error or b.pc == start.pc
        if a is not DIVERGED and not (b.pc in ls2 and b.pc not in ls1):
            assert a.pc == b.pc and a.env == b.env


def test_exec_block_is_deterministic(backend):
    rng = random.Random(7)
    p, _ = randgen.random_program(rng)
    env = randgen.random_env(rng, randgen.DEFAULT_TYPES)
    bs = BirState(env, p.blocks[0].label)
    assert exec_block(p, bs) == exec_block(p, bs)
