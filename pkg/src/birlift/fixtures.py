"""Shared fixtures: instruction forms, small BIR programs, an end-to-end snippet."""

from __future__ import annotations

from . import isa
from .isa import (
    NOP,
    enc_add_imm,
    enc_add_reg,
    enc_b,
    enc_bcond,
    enc_cbz,
    enc_ldst,
    enc_logic,
    enc_movw,
    enc_ret,
)
from .syntax import (
    Assign,
    BinOp,
    BinOpKind,
    Block,
    CJmp,
    Jmp,
    Load,
    Program,
    Store,
    Var,
    c,
)

BASE = 0x10000000

# One entry per supported instruction form; the first three are the
# worked encodings add x0,x1,x0 / b.gt / str x0,[sp,#8].
INSTRUCTION_FORMS: list[tuple[str, int]] = [
    ("add x0, x1, x0", 0x8B000020),
    ("b.gt .-0x30", 0x54FFFE8C),
    ("str x0, [sp, #8]", 0xF90007E0),
    ("add x1, x2, #0x10", enc_add_imm(1, 2, 0x10)),
    ("add x3, sp, #1, lsl #12", enc_add_imm(3, 31, 1, shift12=True)),
    ("add sp, sp, #16", enc_add_imm(31, 31, 16)),
    ("sub x4, x5, #7", enc_add_imm(4, 5, 7, sub=True)),
    ("adds x6, x7, #0xfff", enc_add_imm(6, 7, 0xFFF, setflags=True)),
    ("cmp x8, #3", enc_add_imm(31, 8, 3, sub=True, setflags=True)),
    ("subs x0, x0, #1", enc_add_imm(0, 0, 1, sub=True, setflags=True)),
    ("adds x9, x10, x11", enc_add_reg(9, 10, 11, setflags=True)),
    ("sub x12, x13, x14", enc_add_reg(12, 13, 14, sub=True)),
    ("subs x0, x0, x1", enc_add_reg(0, 0, 1, sub=True, setflags=True)),
    ("cmn x2, x3", enc_add_reg(31, 2, 3, setflags=True)),
    ("and x1, x2, x3", enc_logic("and", 1, 2, 3)),
    ("mov x4, x5", enc_logic("orr", 4, 31, 5)),
    ("eor x6, x6, x7", enc_logic("eor", 6, 6, 7)),
    ("movz x1, #0xbeef, lsl #16", enc_movw("movz", 1, 0xBEEF, 16)),
    ("movn x2, #0x1234", enc_movw("movn", 2, 0x1234)),
    ("movk x3, #0xcafe, lsl #48", enc_movw("movk", 3, 0xCAFE, 48)),
    ("ldr x1, [x2, #16]", enc_ldst(True, 64, 1, 2, 16)),
    ("ldr w3, [sp, #4]", enc_ldst(True, 32, 3, 31, 4)),
    ("str w5, [x6, #8]", enc_ldst(False, 32, 5, 6, 8)),
    ("ldr x30, [x30]", enc_ldst(True, 64, 30, 30, 0)),
    ("b .+0x40", enc_b(0x40)),
    ("bl .-0x100", enc_b(-0x100, link=True)),
    ("b.eq .+0x8", enc_bcond("eq", 8)),
    ("b.hi .-0x4", enc_bcond("hi", -4)),
    ("b.ge .+0x10", enc_bcond("ge", 0x10)),
    ("b.al .+0xc", enc_bcond("al", 0xC)),
    ("cbz x3, .+0x8", enc_cbz(3, 8)),
    ("cbnz w4, .-0x8", enc_cbz(4, -8, nonzero=True, size=32)),
    ("ret", enc_ret()),
    ("ret x1", enc_ret(1)),
    ("nop", NOP),
]

SAMPLE_WORDS = {"add": 0x8B000020, "b.gt": 0x54FFFE8C, "str": 0xF90007E0}


def forms_program(base: int = BASE) -> list[tuple[int, int]]:
    """All instruction forms laid out consecutively from ``base``."""
    return [(base + 4 * i, w) for i, (_, w) in enumerate(INSTRUCTION_FORMS)]


def sample_sequence(base: int = 0x10000004) -> list[tuple[int, int]]:
    """add / str / b.gt, with the branch at 0x1000000c by default."""
    return [
        (base, SAMPLE_WORDS["add"]),
        (base + 4, SAMPLE_WORDS["str"]),
        (base + 8, SAMPLE_WORDS["b.gt"]),
    ]


def all_condition_branches(base: int = BASE) -> list[tuple[int, int]]:
    return [(base + 4 * k, enc_bcond(k, 8)) for k in range(16)]


# --------------------------------------------------------------------------
# BIR programs


def pop_push_program() -> Program:
    """Pop into R1, push R1, with 32-bit registers and memory.

    0x400000: R1 := MEM[SP]; SP := SP + 4; jmp 0x400004
    0x400004: MEM[SP] := R1; SP := SP - 4; jmp 0x400008
    """
    add = BinOp(BinOpKind.ADD, Var("SP"), c(32, 4))
    sub = BinOp(BinOpKind.SUB, Var("SP"), c(32, 4))
    return Program(
        (
            Block(
                0x400000,
                (Assign("R1", Load(Var("MEM"), Var("SP"), 32)), Assign("SP", add)),
                Jmp(c(32, 0x400004)),
            ),
            Block(
                0x400004,
                (Assign("MEM", Store(Var("MEM"), Var("SP"), Var("R1"), 32)), Assign("SP", sub)),
                Jmp(c(32, 0x400008)),
            ),
        )
    )


def diamond_program() -> Program:
    """Eight-node DAG with entries l0, l1 and exits l6, l7.

    l0 -> l2, l3;  l1 -> l4;  l2 -> l4, l5;  l3 -> l5;  l4 -> l5, l7;  l5 -> l6, l7
    Each block bumps X so that preconditions differ per path.
    """
    from .syntax import LabelConst

    def bump(k: int):
        return (Assign("X", BinOp(BinOpKind.ADD, Var("X"), c(8, k))),)

    cond = Var("B")
    L = LabelConst
    return Program(
        (
            Block("l0", bump(1), CJmp(cond, L("l2"), L("l3"))),
            Block("l1", bump(2), Jmp(L("l4"))),
            Block("l2", bump(3), CJmp(BinOp(BinOpKind.ULT, Var("X"), c(8, 9)), L("l4"), L("l5"))),
            Block("l3", bump(4), Jmp(L("l5"))),
            Block("l4", bump(5), CJmp(cond, L("l5"), L("l7"))),
            Block("l5", bump(6), CJmp(BinOp(BinOpKind.EQ, Var("X"), c(8, 0)), L("l6"), L("l7"))),
        )
    )


def chain_program(n: int) -> Program:
    """Y1 := X + X; Y2 := Y1 + Y1; ...; Yn := Y(n-1) + Y(n-1) in a single block."""
    stmts = []
    prev = "X"
    for i in range(1, n + 1):
        stmts.append(Assign(f"Y{i}", BinOp(BinOpKind.ADD, Var(prev), Var(prev))))
        prev = f"Y{i}"
    return Program((Block("entry", tuple(stmts), Jmp(c(64, 0))),))


# --------------------------------------------------------------------------
# End-to-end snippet: straight-line code using a stack frame below the code.

E2E_BASE = 0x10000000
E2E_ASM = [
    ("sub sp, sp, #32", enc_add_imm(31, 31, 32, sub=True)),
    ("movz x0, #0x1234", enc_movw("movz", 0, 0x1234)),
    ("movk x0, #0x5678, lsl #16", enc_movw("movk", 0, 0x5678, 16)),
    ("add x1, x0, x0", enc_add_reg(1, 0, 0)),
    ("str x0, [sp, #8]", enc_ldst(False, 64, 0, 31, 8)),
    ("str x1, [sp, #16]", enc_ldst(False, 64, 1, 31, 16)),
    ("ldr x2, [sp, #8]", enc_ldst(True, 64, 2, 31, 8)),
    ("eor x3, x2, x0", enc_logic("eor", 3, 2, 0)),
    ("adds x4, x3, x1", enc_add_reg(4, 3, 1, setflags=True)),
    ("str w4, [sp, #4]", enc_ldst(False, 32, 4, 31, 4)),
    ("ldr x5, [sp, #16]", enc_ldst(True, 64, 5, 31, 16)),
    ("add sp, sp, #32", enc_add_imm(31, 31, 32)),
]


def e2e_words(base: int = E2E_BASE) -> list[tuple[int, int]]:
    return [(base + 4 * i, w) for i, (_, w) in enumerate(E2E_ASM)]


def e2e_binary() -> bytes:
    return b"".join(w.to_bytes(4, "little") for _, w in E2E_ASM)


E2E_EXIT = E2E_BASE + 4 * len(E2E_ASM)

# Stack frame strictly below the code, 16-byte aligned, far from address 0.
E2E_PRE = (
    "(land (eq (and SP (const 64 0xf)) (const 64 0x0))"
    " (land (ult (const 64 0x1000) SP) (ult SP (const 64 0x10000000))))"
)
# Alignment kept, separation from the code dropped.
E2E_PRE_WEAK = (
    "(land (eq (and SP (const 64 0xf)) (const 64 0x0)) (ult (const 64 0x1000) SP))"
)
E2E_POST = "(land (eq R2 R0) (land (eq R3 (const 64 0x0)) (eq R5 R1)))"


def e2e_contract(pre: str = E2E_PRE, post: str = "true") -> str:
    return (
        f"(pre {E2E_BASE:#x} {pre})\n"
        f"(post {E2E_EXIT:#x} {post})\n"
    )


def sample_machine_state(pc: int = BASE) -> isa.MachState:
    return isa.MachState(pc=pc)
