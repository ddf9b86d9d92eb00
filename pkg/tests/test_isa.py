import itertools
import random

import pytest

from birlift import isa
from birlift.fixtures import INSTRUCTION_FORMS
from birlift.isa import (
    AddSubReg,
    BCond,
    GuardedEffect,
    LdrStrUImm,
    MachState,
    Stuck,
    Unsupported,
    c64,
    decode,
    m,
    mach_step,
    meval,
    step_cases,
)
from birlift.syntax import Memory

AT = 0x1000000C


def state_with(word, pc=AT, **kw):
    mem = kw.pop("mem", Memory(64))
    return MachState(pc=pc, mem=isa.install(mem, [(pc, word)]), **kw)


def regs(**vals):
    r = [0] * 31
    for k, v in vals.items():
        r[int(k[1:])] = v
    return tuple(r)


# -- decode --------------------------------------------------------------------


def test_decode_worked_encodings():
    assert decode(0x8B000020) == AddSubReg(dst=0, a=1, b=0, sub=False, setflags=False)
    assert str(decode(0x8B000020)) == "add x0, x1, x0"
    gt = decode(0x54FFFE8C)
    assert type(gt) is BCond and isa.COND_NAMES[gt.cond] == "gt" and gt.offset == -0x30
    assert decode(0xF90007E0) == LdrStrUImm(load=False, size=64, reg=0, base=31, offset=8)
    assert str(decode(0xF90007E0)) == "str x0, [sp, #8]"


@pytest.mark.parametrize("text, word", INSTRUCTION_FORMS)
def test_every_form_decodes(text, word):
    instr = decode(word)
    assert type(instr) is not Unsupported
    assert step_cases(instr, AT)


def test_unsupported_words_keep_the_raw_word():
    for w in (0x00000000, 0xD4000001, 0x9B027C20):  # udf, svc, mul
        assert decode(w) == Unsupported(w)
    with pytest.raises(ValueError):
        decode(1 << 32)


_FAMILY = {
    "AddSubImm": {"add", "adds", "sub", "subs", "cmp", "cmn", "mov"},
    "AddSubReg": {"add", "adds", "sub", "subs", "cmp", "cmn", "neg", "negs"},
    "LogicReg": {"and", "orr", "eor", "mov"},
    "MovWide": {"movz", "movn", "movk", "mov"},
    "LdrStrUImm": {"ldr", "str"},
    "B": {"b", "bl"},
    "Cbz": {"cbz", "cbnz"},
    "Ret": {"ret"},
    "Nop": {"nop"},
}
_COND_ALIAS = {"cs": "hs", "cc": "lo"}


def test_decoder_agrees_with_capstone():
    capstone = pytest.importorskip("capstone")
    md = capstone.Cs(capstone.CS_ARCH_ARM64, capstone.CS_MODE_ARM)

    def cs(word):
        out = list(md.disasm(word.to_bytes(4, "little"), AT))
        return (out[0].mnemonic, out[0].op_str) if out else None

    rng = random.Random(1)
    words = [w for _, w in INSTRUCTION_FORMS]
    # single-bit flips of supported encodings land on both sides of the subset
    words += [w ^ (1 << rng.randrange(32)) for w in words for _ in range(40)]
    words += [rng.getrandbits(32) for _ in range(5000)]
    checked = 0
    for w in words:
        instr = decode(w, AT)
        if type(instr) is Unsupported:
            continue
        got = cs(w)
        assert got is not None, f"{w:#010x} decoded as '{instr}' but capstone rejects it"
        mnem, ops = got
        name = type(instr).__name__
        if name == "BCond":
            names = {isa.COND_NAMES[instr.cond], _COND_ALIAS.get(isa.COND_NAMES[instr.cond])}
            assert mnem in {"b." + n for n in names if n} or (instr.cond >= 14 and mnem == "b")
        else:
            assert mnem in _FAMILY[name], (hex(w), str(instr), mnem, ops)
        if name in ("B", "BCond", "Cbz"):
            assert ops.endswith(f"#{(AT + instr.offset) & isa.MASK64:#x}")
        checked += 1
    assert checked > 500


# -- step_cases ----------------------------------------------------------------


def test_step_cases_bcond_gt():
    cases = step_cases(decode(0x54FFFE8C), AT)
    assert len(cases) == 2
    g = cases[0].guard
    assert g == m("and", m("eq", isa.MField("z"), isa.MFALSE), m("eq", isa.MField("n"), isa.MField("v")))
    assert cases[1].guard == m("not", g)
    assert cases[0].updates == {"pc": c64(AT - 0x30)}
    assert cases[1].updates == {"pc": c64(AT + 4)}


def test_step_cases_store():
    (case,) = step_cases(decode(0xF90007E0), AT)
    addr = m("add", isa.MField("sp"), c64(8))
    assert case.guard == m("aligned", addr, width=8)
    assert case.updates["mem"] == m("store", isa.MField("mem"), addr, isa.MField("r0"), width=64)
    assert case.updates["pc"] == c64(AT + 4)


def test_step_cases_add():
    (case,) = step_cases(decode(0x8B000020), AT)
    assert case.guard == isa.MTRUE
    assert case.updates == {"r0": m("add", isa.MField("r1"), isa.MField("r0")), "pc": c64(AT + 4)}


# -- mach_step -----------------------------------------------------------------


def test_mach_step_add():
    s2 = mach_step(state_with(0x8B000020, r=regs(r0=2, r1=3)))
    assert s2.r[0] == 5 and s2.pc == AT + 4


def test_mach_step_stuck():
    assert mach_step(state_with(0x00000000)).reason == Stuck.UNDECODABLE
    s = state_with(0xF90007E0, sp=0x2001)
    assert mach_step(s).reason == Stuck.UNPREDICTABLE
    assert mach_step(MachState(pc=2)).reason == Stuck.UNPREDICTABLE


def test_mach_step_store_and_branch():
    s2 = mach_step(state_with(0xF90007E0, sp=0x2000, r=regs(r0=0x1122334455667788)))
    assert s2.mem.load(0x2008, 8) == 0x1122334455667788
    taken = mach_step(state_with(0x54FFFE8C, n=True, v=True))
    assert taken.pc == AT - 0x30
    assert mach_step(state_with(0x54FFFE8C, z=True)).pc == AT + 4


def test_mach_step_is_deterministic():
    rng = random.Random(3)
    for _, w in INSTRUCTION_FORMS:
        r = tuple(rng.getrandbits(64) for _ in range(31))
        s = state_with(w, r=r, sp=0x4000, n=True, c=True)
        assert mach_step(s) == mach_step(s)


def test_subs_flags():
    # subs x0, x0, #1 from 0: result all ones, N set, borrow so C clear
    s2 = mach_step(state_with(isa.enc_add_imm(0, 0, 1, sub=True, setflags=True)))
    assert s2.r[0] == isa.MASK64
    assert (s2.n, s2.z, s2.c, s2.v) == (True, False, False, False)
    s3 = mach_step(state_with(isa.enc_add_imm(0, 0, 1, sub=True, setflags=True), r=regs(r0=1)))
    assert (s3.n, s3.z, s3.c, s3.v) == (False, True, True, False)


def test_produced_pc_is_aligned():
    rng = random.Random(5)
    for _, w in INSTRUCTION_FORMS:
        for _ in range(20):
            r = tuple(rng.getrandbits(64) for _ in range(31))
            s2 = mach_step(state_with(w, r=r, sp=0x4000))
            if type(s2) is MachState:
                assert s2.pc % 4 == 0


# -- properties ----------------------------------------------------------------


def _flag_states():
    for n, z, c, v in itertools.product((False, True), repeat=4):
        yield MachState(n=n, z=z, c=c, v=v)


@pytest.mark.parametrize("cond", range(16))
def test_branch_guards_exclusive_and_covering(cond):
    cases = step_cases(BCond(cond, 2), AT)
    for s in _flag_states():
        assert sum(k.holds(s) for k in cases) == 1


def test_cbz_guards_exclusive_and_covering():
    rng = random.Random(0)
    for w in (isa.enc_cbz(3, 8), isa.enc_cbz(3, 8, nonzero=True, size=32)):
        cases = step_cases(decode(w), AT)
        for x in (0, 1, 1 << 32, rng.getrandbits(64)):
            s = MachState(r=regs(r3=x))
            assert sum(k.holds(s) for k in cases) == 1


def test_carry_rule_exhaustive_width_8():
    x, y = isa.MField("r0"), isa.MField("r1")
    for a in range(256):
        for b in range(256):
            assert (a + b >= 256) == ((~a & 0xFF) < b)
    # the model's carry operator is the unbounded-sum definition
    s = MachState(r=regs(r0=isa.MASK64, r1=1))
    assert meval(m("carry", x, y, isa.MConst(1, 0)), s) == 1


def test_carry_rule_random_64():
    rng = random.Random(11)
    mask = isa.MASK64
    for _ in range(20000):
        a, b = rng.getrandbits(64), rng.getrandbits(64)
        assert (a + b >= 1 << 64) == ((~a & mask) < b)


def test_guarded_effect_writes():
    case = GuardedEffect(isa.MTRUE, {"mem": m("store", isa.MField("mem"), c64(0x10), c64(1), width=64),
                                      "pc": c64(4)})
    assert case.writes(MachState()) == [(0x10, 8)]
    assert not case.pc_only
