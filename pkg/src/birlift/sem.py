"""Operational semantics: statements, single-block transitions, and the weak transition."""

from __future__ import annotations

from collections.abc import Collection
from dataclasses import dataclass

from . import _backend
from .syntax import DIVERGED, FAILED, TYPE_ERROR, Env, Label, Outcome, Program, Stmt

DEFAULT_FUEL = 1_000_000


@dataclass(frozen=True)
class BirState:
    """An environment plus a program counter that is a label, ``FAILED`` or ``TYPE_ERROR``."""

    env: Env
    pc: Label | Outcome

    @property
    def is_error(self) -> bool:
        return self.pc is FAILED or self.pc is TYPE_ERROR


def exec_stmt(s: Stmt, env: Env) -> Env | Outcome:
    """Effect of one statement: a new env, ``FAILED`` or ``TYPE_ERROR``."""
    out = dict(env)
    err = _backend.run_stmts((s,), out)
    return out if err is None else err


def exec_block(p: Program, bs: BirState) -> BirState:
    """One block transition.  A jump to a label absent from ``p`` is ``FAILED``."""
    if bs.is_error:
        return bs
    block = p.index.get(bs.pc)
    if block is None:
        return BirState(bs.env, FAILED)
    env, pc = _backend.run_block(block, bs.env)
    if not isinstance(pc, Outcome) and pc not in p.index:
        pc = FAILED
    return BirState(env, pc)


def weak_exec(
    p: Program, bs: BirState, ls: Collection[Label], fuel: int = DEFAULT_FUEL
) -> BirState | Outcome:
    """First reachable state that is an error or has its pc in ``ls``.

    Returns ``DIVERGED`` when ``fuel`` blocks run without reaching one.  A
    start state already in ``ls`` is returned unchanged; jumping to a label
    that is neither in ``ls`` nor a block of ``p`` fails.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    if bs.is_error:
        return bs
    ls = ls if isinstance(ls, (set, frozenset)) else frozenset(ls)
    res = _backend.weak_run(p.index, bs.env, bs.pc, ls, fuel)
    if res is DIVERGED:
        return DIVERGED
    env, pc = res
    if env is bs.env and pc == bs.pc:
        return bs
    return BirState(env, pc)


def weak_exec_step(
    p: Program, bs: BirState, ls: Collection[Label], fuel: int = DEFAULT_FUEL
) -> BirState | Outcome:
    """Like ``weak_exec`` but always executes at least one block first."""
    if bs.is_error:
        return bs
    block = p.index.get(bs.pc)
    if block is None:
        return BirState(bs.env, FAILED)
    env, pc = _backend.run_block(block, bs.env)
    if isinstance(pc, Outcome) or pc in ls:
        return BirState(env, pc)
    if pc not in p.index:
        return BirState(env, FAILED)
    if fuel <= 1:
        return DIVERGED
    return weak_exec(p, BirState(env, pc), ls, fuel - 1)
