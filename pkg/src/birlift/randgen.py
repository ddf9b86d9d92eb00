"""Random well-typed BIR expressions, programs, environments and goals.

Used by the property tests and the benchmark.  Everything takes an explicit
``random.Random`` so runs are reproducible.
"""

from __future__ import annotations

import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from .syntax import (
    Assert,
    Assign,
    BinOp,
    BinOpKind,
    Block,
    BType,
    CJmp,
    Const,
    Expr,
    Ite,
    Jmp,
    Label,
    LabelConst,
    Load,
    Mem,
    Memory,
    Program,
    Reg,
    Store,
    Subst,
    UnOp,
    UnOpKind,
    Var,
    Word,
)

_ARITH = (
    BinOpKind.ADD, BinOpKind.SUB, BinOpKind.MUL, BinOpKind.AND, BinOpKind.OR,
    BinOpKind.XOR, BinOpKind.SHL, BinOpKind.LSHR, BinOpKind.ASHR,
)
_BOOL = (BinOpKind.LAND, BinOpKind.LOR, BinOpKind.IMPLIES)
_CMP = (BinOpKind.EQ, BinOpKind.ULT, BinOpKind.SLT)

DEFAULT_TYPES: dict[str, BType] = {
    "B0": Reg(1), "B1": Reg(1),
    "X": Reg(8), "Y": Reg(8),
    "H": Reg(16), "W": Reg(32), "D": Reg(64),
    "MEM": Mem(32),
}


def _interesting(rng: random.Random, width: int) -> int:
    mask = (1 << width) - 1
    r = rng.random()
    if r < 0.3:
        return rng.choice((0, 1, 2, mask, mask >> 1, (mask >> 1) + 1)) & mask
    if r < 0.5:
        return rng.randrange(16) & mask
    return rng.getrandbits(width)


@dataclass
class ExprGen:
    """Generator of expressions over a fixed variable typing."""

    rng: random.Random
    typing: Mapping[str, BType]
    subst_budget: int = 0  # how many Subst nodes may still be introduced
    word_widths: Sequence[int] = (1, 8, 16, 32, 64)

    def _vars(self, t: BType) -> list[str]:
        return [n for n, ty in self.typing.items() if ty is t]

    def _mem_types(self) -> list[BType]:
        return sorted({t for t in self.typing.values() if t.kind == "mem"}, key=lambda t: t.width)

    def expr(self, t: BType, depth: int = 3) -> Expr:
        rng = self.rng
        if self.subst_budget > 0 and depth > 0 and rng.random() < 0.25:
            return self._subst(t, depth)
        if t.kind == "mem":
            return self._mem(t, depth)
        names = self._vars(t)
        if depth <= 0 or rng.random() < 0.25:
            if names and rng.random() < 0.6:
                return Var(rng.choice(names))
            return Const(t.width, _interesting(rng, t.width))
        if t.width == 1:
            return self._bool(depth)
        return self._word(t.width, depth)

    def _subst(self, t: BType, depth: int) -> Expr:
        self.subst_budget -= 1
        v = self.rng.choice(sorted(self.typing))
        vt = self.typing[v]
        repl = self.expr(vt, depth - 1)
        body = self.expr(t, depth - 1)
        return Subst(repl, v, body)

    def _word(self, w: int, depth: int) -> Expr:
        rng = self.rng
        r = rng.random()
        d = depth - 1
        if r < 0.45:
            return BinOp(rng.choice(_ARITH), self.expr(Reg(w), d), self.expr(Reg(w), d))
        if r < 0.55:
            return UnOp(rng.choice((UnOpKind.NOT, UnOpKind.NEG)), self.expr(Reg(w), d))
        if r < 0.7:
            smaller = [x for x in self.word_widths if x < w]
            larger = [x for x in self.word_widths if x > w]
            opts = []
            if smaller:
                opts += ["zext", "sext"]
            if larger:
                opts.append("trunc")
            if opts:
                kind = rng.choice(opts)
                if kind == "trunc":
                    src = rng.choice(larger)
                    return UnOp(UnOpKind.TRUNC, self.expr(Reg(src), d), w)
                src = rng.choice(smaller)
                op = UnOpKind.ZEXT if kind == "zext" else UnOpKind.SEXT
                return UnOp(op, self.expr(Reg(src), d), w)
        if r < 0.82:
            return Ite(self.expr(Reg(1), d), self.expr(Reg(w), d), self.expr(Reg(w), d))
        mems = self._mem_types()
        if mems and w % 8 == 0:
            mt = rng.choice(mems)
            return Load(self.expr(mt, d), self._addr(mt.width, d), w)
        return BinOp(rng.choice(_ARITH), self.expr(Reg(w), d), self.expr(Reg(w), d))

    def _addr(self, aw: int, depth: int) -> Expr:
        # Keep most accesses inside a small window so stores and loads meet.
        e = self.expr(Reg(aw), depth)
        if self.rng.random() < 0.7:
            return BinOp(BinOpKind.AND, e, Const(aw, 0xF))
        return e

    def _bool(self, depth: int) -> Expr:
        rng = self.rng
        r = rng.random()
        d = depth - 1
        if r < 0.5:
            w = rng.choice([x for x in self.word_widths if x > 1] or [1])
            return BinOp(rng.choice(_CMP), self.expr(Reg(w), d), self.expr(Reg(w), d))
        if r < 0.75:
            return BinOp(rng.choice(_BOOL), self.expr(Reg(1), d), self.expr(Reg(1), d))
        if r < 0.85:
            return UnOp(UnOpKind.NOT, self.expr(Reg(1), d))
        mems = self._mem_types()
        if mems and r < 0.9:
            mt = rng.choice(mems)
            return BinOp(BinOpKind.EQ, self.expr(mt, d), self.expr(mt, d))
        return Ite(self.expr(Reg(1), d), self.expr(Reg(1), d), self.expr(Reg(1), d))

    def _mem(self, t: BType, depth: int) -> Expr:
        rng = self.rng
        names = self._vars(t)
        if depth <= 0 or rng.random() < 0.3:
            return Var(rng.choice(names))
        d = depth - 1
        if rng.random() < 0.8:
            w = rng.choice((8, 16, 32))
            return Store(self.expr(t, d), self._addr(t.width, d), self.expr(Reg(w), d), w)
        return Ite(self.expr(Reg(1), d), self.expr(t, d), self.expr(t, d))


# --------------------------------------------------------------------------
# Values


def random_value(rng: random.Random, t: BType, window: int = 16):
    if t.kind == "reg":
        return Word(t.width, _interesting(rng, t.width))
    data = {a: rng.randrange(256) for a in range(window) if rng.random() < 0.5}
    return Memory(t.width, data)


def random_env(rng: random.Random, typing: Mapping[str, BType]) -> dict:
    return {n: random_value(rng, t) for n, t in sorted(typing.items())}


# --------------------------------------------------------------------------
# Programs


def _label_const(lab: Label) -> Expr:
    return Const(64, lab) if isinstance(lab, int) else LabelConst(lab)


def random_labels(rng: random.Random, n: int) -> list[Label]:
    out: list[Label] = []
    used: set = set()
    while len(out) < n:
        lab: Label = rng.randrange(0x1000) * 4 if rng.random() < 0.6 else f"b{rng.randrange(1000)}"
        if lab not in used:
            used.add(lab)
            out.append(lab)
    return out


def random_program(
    rng: random.Random,
    typing: Mapping[str, BType] | None = None,
    max_blocks: int = 8,
    max_stmts: int = 4,
    loop_free: bool = False,
    exits: int = 2,
    depth: int = 3,
    assert_rate: float = 0.15,
    computed_jumps: bool = True,
) -> tuple[Program, list[Label]]:
    """A well-typed program and its exit labels (targets that are not blocks).

    With ``loop_free`` every jump goes to a later block or an exit; otherwise
    back edges appear on one side of conditional jumps and in computed jumps.
    """
    typing = dict(typing or DEFAULT_TYPES)
    gen = ExprGen(rng, typing)
    n = rng.randint(1, max_blocks)
    labels = random_labels(rng, n + exits)
    blocks_l, exit_l = labels[:n], labels[n:]
    assignable = sorted(typing)
    blocks = []
    for i, lab in enumerate(blocks_l):
        stmts = []
        for _ in range(rng.randint(0, max_stmts)):
            if rng.random() < assert_rate:
                stmts.append(Assert(gen.expr(Reg(1), depth)))
            else:
                v = rng.choice(assignable)
                stmts.append(Assign(v, gen.expr(typing[v], depth)))
        later = blocks_l[i + 1 :] + exit_l if loop_free else blocks_l + exit_l
        forward = blocks_l[i + 1 :] + exit_l
        r = rng.random()
        if r < 0.45:
            cf = Jmp(_label_const(rng.choice(forward)))
        elif r < 0.9 or not computed_jumps or loop_free:
            # a back edge only on one side, so loops need their condition to keep holding
            t1, t2 = _label_const(rng.choice(later)), _label_const(rng.choice(forward))
            if rng.random() < 0.5:
                t1, t2 = t2, t1
            cf = CJmp(gen.expr(Reg(1), depth), t1, t2)
        else:
            # computed target: an ite over integer labels, or a raw word
            ints = [x for x in later if isinstance(x, int)] or [0]
            if rng.random() < 0.7:
                cf = Jmp(Ite(gen.expr(Reg(1), depth), Const(64, rng.choice(ints)), Const(64, rng.choice(ints))))
            else:
                cf = Jmp(gen.expr(Reg(64), depth))
        blocks.append(Block(lab, tuple(stmts), cf))
    return Program(tuple(blocks)), exit_l


def random_goal(
    rng: random.Random, typing: Mapping[str, BType], max_substs: int = 4, depth: int = 4
) -> tuple[Expr, Expr]:
    """A premise (substitution-free) and a conclusion with up to ``max_substs`` Subst nodes."""
    premise = ExprGen(rng, typing).expr(Reg(1), 2)
    gen = ExprGen(rng, typing, subst_budget=rng.randint(1, max_substs))
    conclusion = gen.expr(Reg(1), depth)
    return premise, conclusion
