"""Reference model of an ARMv8 A64 subset.

``step_cases`` describes an instruction as a list of guarded effects whose
guards and field updates are symbolic machine expressions (``MExpr``).  The
machine interpreter evaluates those expressions with unbounded integer
arithmetic (the carry flag really is ``[x] + [y] >= 2**n``); the lifter
translates the very same expressions into BIR.

Supported encodings (64-bit register forms unless noted):

* ADD/ADDS/SUB/SUBS (immediate, optional LSL #12) -- CMP/CMN are aliases
* ADD/ADDS/SUB/SUBS (shifted register, shift amount 0)
* AND/ORR/EOR (shifted register, shift amount 0) -- MOV (register) is ORR
* MOVZ/MOVN/MOVK
* LDR/STR (unsigned offset), 32- and 64-bit
* B, BL, B.cond, CBZ/CBNZ (32- and 64-bit), RET, NOP
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import ClassVar, Union

from .syntax import Memory

MASK64 = (1 << 64) - 1
REG_NAMES = tuple(f"r{i}" for i in range(31))
FLAG_NAMES = ("n", "z", "c", "v")
WORD_FIELDS = REG_NAMES + ("sp", "pc")

COND_NAMES = ("eq", "ne", "cs", "cc", "mi", "pl", "vs", "vc", "hi", "ls", "ge", "lt", "gt", "le", "al", "nv")


# --------------------------------------------------------------------------
# Machine state


@dataclass(frozen=True)
class MachState:
    r: tuple[int, ...] = (0,) * 31
    sp: int = 0
    pc: int = 0
    n: bool = False
    z: bool = False
    c: bool = False
    v: bool = False
    mem: Memory = field(default_factory=lambda: Memory(64))

    def __post_init__(self) -> None:
        if len(self.r) != 31:
            raise ValueError("ARMv8 has 31 general registers")
        for x in (*self.r, self.sp, self.pc):
            if not 0 <= x <= MASK64:
                raise ValueError(f"register value {x:#x} is not a 64-bit word")
        if self.mem.addr_width != 64:
            raise ValueError("machine memory is 64-bit addressed")

    @property
    def lr(self) -> int:
        return self.r[30]

    def get(self, name: str):
        if name[0] == "r" and name != "r":
            return self.r[int(name[1:])]
        if name in FLAG_NAMES:
            return int(getattr(self, name))
        return getattr(self, name)

    def updated(self, values: dict) -> MachState:
        """Copy with fields replaced; keys are field names as in ``get``."""
        regs = None
        kw = {}
        for name, val in values.items():
            if name[0] == "r" and name != "r":
                if regs is None:
                    regs = list(self.r)
                regs[int(name[1:])] = val
            elif name in FLAG_NAMES:
                kw[name] = bool(val)
            else:
                kw[name] = val
        if regs is not None:
            kw["r"] = tuple(regs)
        return replace(self, **kw)

    def fetch(self) -> int:
        return self.mem.load(self.pc, 4)


def install(mem: Memory, words) -> Memory:
    """Write ``(address, word)`` pairs little-endian into ``mem``."""
    for addr, word in words:
        mem = mem.store(addr, 4, word)
    return mem


# --------------------------------------------------------------------------
# Machine expressions


class MExpr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class MConst(MExpr):
    width: int
    value: int


@dataclass(frozen=True, slots=True)
class MField(MExpr):
    name: str


@dataclass(frozen=True, slots=True)
class MOp(MExpr):
    """Operator application.

    ``width`` is the result width for ``zext``/``trunc``, the access width in
    bits for ``load``/``store``, and the byte alignment for ``aligned``.
    """

    op: str
    args: tuple[MExpr, ...]
    width: int = 0


MTRUE = MConst(1, 1)
MFALSE = MConst(1, 0)


def field_width(name: str) -> int:
    if name in FLAG_NAMES:
        return 1
    if name == "mem":
        return 0
    return 64


def mwidth(e: MExpr) -> int:
    """Bit width of a word-valued machine expression (0 for memory)."""
    if type(e) is MConst:
        return e.width
    if type(e) is MField:
        return field_width(e.name)
    op = e.op
    if op in ("eq", "msb", "carry", "overflow", "aligned"):
        return 1
    if op in ("zext", "trunc", "load"):
        return e.width
    if op == "store":
        return 0
    if op == "ite":
        return mwidth(e.args[1])
    return mwidth(e.args[0])


def mfields(e: MExpr) -> set[str]:
    if type(e) is MField:
        return {e.name}
    if type(e) is MOp:
        out: set[str] = set()
        for a in e.args:
            out |= mfields(a)
        return out
    return set()


def _signed(x: int, w: int) -> int:
    return x - (1 << w) if x >> (w - 1) else x


def meval(e: MExpr, s: MachState):
    """Value of ``e`` in ``s``: an int for words and flags, a ``Memory`` for ``mem``."""
    if type(e) is MConst:
        return e.value
    if type(e) is MField:
        return s.get(e.name)
    op = e.op
    args = [meval(a, s) for a in e.args]
    if op in ("add", "sub", "and", "or", "xor", "not"):
        w = mwidth(e.args[0])
        mask = (1 << w) - 1
        if op == "add":
            return (args[0] + args[1]) & mask
        if op == "sub":
            return (args[0] - args[1]) & mask
        if op == "and":
            return args[0] & args[1]
        if op == "or":
            return args[0] | args[1]
        if op == "xor":
            return args[0] ^ args[1]
        return ~args[0] & mask
    if op == "eq":
        return int(args[0] == args[1])
    if op == "msb":
        return args[0] >> (mwidth(e.args[0]) - 1)
    if op == "carry":
        w = mwidth(e.args[0])
        return int(args[0] + args[1] + args[2] >= 1 << w)
    if op == "overflow":
        w = mwidth(e.args[0])
        total = _signed(args[0], w) + _signed(args[1], w) + args[2]
        return int(not -(1 << (w - 1)) <= total < (1 << (w - 1)))
    if op == "aligned":
        return int(args[0] % e.width == 0)
    if op == "zext":
        return args[0]
    if op == "trunc":
        return args[0] & ((1 << e.width) - 1)
    if op == "ite":
        return args[1] if args[0] else args[2]
    if op == "load":
        return args[0].load(args[1], e.width // 8)
    if op == "store":
        return args[0].store(args[1], e.width // 8, args[2])
    raise ValueError(f"unknown machine operator {op!r}")


def m(op: str, *args: MExpr, width: int = 0) -> MOp:
    return MOp(op, tuple(args), width)


def c64(value: int) -> MConst:
    return MConst(64, value & MASK64)


# --------------------------------------------------------------------------
# Guarded effects


@dataclass(frozen=True)
class GuardedEffect:
    """One guarded case of an instruction: if ``guard`` holds, apply ``updates``.

    ``updates`` maps machine field names to their new value expressions, all
    evaluated in the pre-state.  Fields not mentioned are unchanged; ``pc``
    is always present.
    """

    guard: MExpr
    updates: dict[str, MExpr]

    def holds(self, s: MachState) -> bool:
        return bool(meval(self.guard, s))

    def apply(self, s: MachState) -> MachState:
        return s.updated({f: meval(e, s) for f, e in self.updates.items()})

    def writes(self, s: MachState) -> list[tuple[int, int]]:
        """``(address, nbytes)`` of every memory write performed from ``s``."""
        out: list[tuple[int, int]] = []
        e = self.updates.get("mem")
        while type(e) is MOp and e.op == "store":
            out.append((meval(e.args[1], s), e.width // 8))
            e = e.args[0]
        return out

    @property
    def pc_only(self) -> bool:
        return set(self.updates) == {"pc"}


# --------------------------------------------------------------------------
# Decoded instructions


@dataclass(frozen=True)
class AddSubImm:
    dst: int
    src: int
    imm12: int
    shift12: bool
    sub: bool
    setflags: bool

    def __str__(self) -> str:
        name = ("sub" if self.sub else "add") + ("s" if self.setflags else "")
        rd = _xreg(self.dst, sp=not self.setflags)
        imm = f"#{self.imm12:#x}" + (", lsl #12" if self.shift12 else "")
        return f"{name} {rd}, {_xreg(self.src, sp=True)}, {imm}"


@dataclass(frozen=True)
class AddSubReg:
    dst: int
    a: int
    b: int
    sub: bool
    setflags: bool

    def __str__(self) -> str:
        name = ("sub" if self.sub else "add") + ("s" if self.setflags else "")
        return f"{name} {_xreg(self.dst)}, {_xreg(self.a)}, {_xreg(self.b)}"


@dataclass(frozen=True)
class LogicReg:
    op: str  # "and" | "orr" | "eor"
    dst: int
    a: int
    b: int

    def __str__(self) -> str:
        return f"{self.op} {_xreg(self.dst)}, {_xreg(self.a)}, {_xreg(self.b)}"


@dataclass(frozen=True)
class MovWide:
    op: str  # "movz" | "movn" | "movk"
    dst: int
    imm16: int
    shift: int

    def __str__(self) -> str:
        return f"{self.op} {_xreg(self.dst)}, #{self.imm16:#x}, lsl #{self.shift}"


@dataclass(frozen=True)
class LdrStrUImm:
    load: bool
    size: int  # 32 or 64
    reg: int
    base: int
    offset: int  # bytes

    def __str__(self) -> str:
        rt = ("x" if self.size == 64 else "w") + (str(self.reg) if self.reg != 31 else "zr")
        if rt == "xzr" or rt == "wzr":
            rt = rt[0] + "zr"
        return f"{'ldr' if self.load else 'str'} {rt}, [{_xreg(self.base, sp=True)}, #{self.offset}]"


@dataclass(frozen=True)
class B:
    imm26: int
    link: bool = False

    @property
    def offset(self) -> int:
        return _sext(self.imm26, 26) * 4

    def __str__(self) -> str:
        return f"{'bl' if self.link else 'b'} .{self.offset:+#x}"


@dataclass(frozen=True)
class BCond:
    cond: int
    imm19: int

    @property
    def offset(self) -> int:
        return _sext(self.imm19, 19) * 4

    def __str__(self) -> str:
        return f"b.{COND_NAMES[self.cond]} .{self.offset:+#x}"


@dataclass(frozen=True)
class Cbz:
    nonzero: bool
    size: int  # 32 or 64
    reg: int
    imm19: int

    @property
    def offset(self) -> int:
        return _sext(self.imm19, 19) * 4

    def __str__(self) -> str:
        r = ("x" if self.size == 64 else "w") + (str(self.reg) if self.reg != 31 else "zr")
        return f"{'cbnz' if self.nonzero else 'cbz'} {r}, .{self.offset:+#x}"


@dataclass(frozen=True)
class Ret:
    reg: int = 30

    def __str__(self) -> str:
        return "ret" if self.reg == 30 else f"ret {_xreg(self.reg)}"


@dataclass(frozen=True)
class Nop:
    def __str__(self) -> str:
        return "nop"


@dataclass(frozen=True)
class Unsupported:
    word: int

    def __str__(self) -> str:
        return f".word {self.word:#010x}"


Instr = Union[AddSubImm, AddSubReg, LogicReg, MovWide, LdrStrUImm, B, BCond, Cbz, Ret, Nop]


def _xreg(i: int, sp: bool = False) -> str:
    if i == 31:
        return "sp" if sp else "xzr"
    if i == 30:
        return "x30"
    return f"x{i}"


def _sext(x: int, bits: int) -> int:
    return x - (1 << bits) if x >> (bits - 1) else x


def decode(word: int, at: int = 0) -> Instr | Unsupported:
    """Decode one 32-bit instruction word; anything outside the subset is ``Unsupported``."""
    if not 0 <= word <= 0xFFFFFFFF:
        raise ValueError(f"{word:#x} is not a 32-bit word")
    rd = word & 31
    rn = (word >> 5) & 31
    rm = (word >> 16) & 31
    sf = word >> 31
    op = (word >> 30) & 1
    s = (word >> 29) & 1
    if word == 0xD503201F:
        return Nop()
    # add/sub immediate: sf op S 100010 sh imm12 Rn Rd
    if (word >> 23) & 0x3F == 0b100010 and sf:
        return AddSubImm(rd, rn, (word >> 10) & 0xFFF, bool((word >> 22) & 1), bool(op), bool(s))
    # add/sub shifted register: sf op S 01011 shift 0 Rm imm6 Rn Rd
    if (word >> 24) & 0x1F == 0b01011 and not (word >> 21) & 1 and sf:
        if (word >> 22) & 3 == 0 and (word >> 10) & 0x3F == 0:
            return AddSubReg(rd, rn, rm, bool(op), bool(s))
        return Unsupported(word)
    # logical shifted register: sf opc 01010 shift N Rm imm6 Rn Rd
    if (word >> 24) & 0x1F == 0b01010 and sf:
        opc = (word >> 29) & 3
        if opc != 3 and (word >> 21) & 7 == 0 and (word >> 10) & 0x3F == 0:
            return LogicReg(("and", "orr", "eor")[opc], rd, rn, rm)
        return Unsupported(word)
    # move wide: sf opc 100101 hw imm16 Rd
    if (word >> 23) & 0x3F == 0b100101 and sf:
        opc = (word >> 29) & 3
        if opc != 1:
            return MovWide({0: "movn", 2: "movz", 3: "movk"}[opc], rd, (word >> 5) & 0xFFFF, 16 * ((word >> 21) & 3))
        return Unsupported(word)
    # load/store unsigned offset: size 111 0 01 opc imm12 Rn Rt
    if (word >> 24) & 0x3F == 0b111001:
        size = word >> 30
        opc = (word >> 22) & 3
        if size in (2, 3) and opc in (0, 1):
            scale = size
            return LdrStrUImm(opc == 1, 8 << size, rd, rn, ((word >> 10) & 0xFFF) << scale)
        return Unsupported(word)
    # unconditional branch (immediate): op 00101 imm26
    if (word >> 26) & 0x1F == 0b00101:
        return B(word & 0x3FFFFFF, link=bool(word >> 31))
    # conditional branch: 0101010 0 imm19 0 cond
    if word >> 24 == 0b01010100 and not (word >> 4) & 1:
        return BCond(word & 0xF, (word >> 5) & 0x7FFFF)
    # compare and branch: sf 011010 op imm19 Rt
    if (word >> 25) & 0x3F == 0b011010:
        return Cbz(bool((word >> 24) & 1), 64 if sf else 32, rd, (word >> 5) & 0x7FFFF)
    # ret: 1101011 0 0 10 11111 000000 Rn 00000
    if word & 0xFFFFFC1F == 0xD65F0000:
        return Ret(rn)
    return Unsupported(word)


# --------------------------------------------------------------------------
# Step function


def _read(i: int, sp: bool = False) -> MExpr:
    if i == 31:
        return MField("sp") if sp else c64(0)
    return MField(f"r{i}")


def _dest(i: int, sp: bool = False) -> str | None:
    if i == 31:
        return "sp" if sp else None
    return f"r{i}"


def cond_guard(cond: int) -> MExpr:
    """The ConditionHolds predicate for a 4-bit condition code."""
    n, z, cf, v = (MField(f) for f in FLAG_NAMES)
    base = cond >> 1
    if base == 0:
        g = m("eq", z, MTRUE)
    elif base == 1:
        g = m("eq", cf, MTRUE)
    elif base == 2:
        g = m("eq", n, MTRUE)
    elif base == 3:
        g = m("eq", v, MTRUE)
    elif base == 4:
        g = m("and", m("eq", cf, MTRUE), m("eq", z, MFALSE))
    elif base == 5:
        g = m("eq", n, v)
    elif base == 6:
        g = m("and", m("eq", z, MFALSE), m("eq", n, v))
    else:
        return MTRUE
    if cond & 1:
        return m("not", g)
    return g


def _flag_updates(x: MExpr, y: MExpr, cin: int, result: MExpr) -> dict[str, MExpr]:
    return {
        "n": m("msb", result),
        "z": m("eq", result, c64(0)),
        "c": m("carry", x, y, MConst(1, cin)),
        "v": m("overflow", x, y, MConst(1, cin)),
    }


def step_cases(instr: Instr, at: int) -> list[GuardedEffect]:
    """Guarded effects of ``instr`` placed at address ``at``."""
    nxt = c64(at + 4)
    t = type(instr)
    if t is AddSubImm or t is AddSubReg:
        if t is AddSubImm:
            x = _read(instr.src, sp=True)
            imm = instr.imm12 << (12 if instr.shift12 else 0)
            y = c64(imm)
            y_neg = c64(~imm)
            dst = _dest(instr.dst, sp=not instr.setflags)
        else:
            x = _read(instr.a)
            y = _read(instr.b)
            y_neg = m("not", y) if type(y) is not MConst else c64(~y.value)
            dst = _dest(instr.dst)
        result = m("sub", x, y) if instr.sub else m("add", x, y)
        upd: dict[str, MExpr] = {}
        if dst is not None:
            upd[dst] = result
        if instr.setflags:
            if instr.sub:
                upd.update(_flag_updates(x, y_neg, 1, result))
            else:
                upd.update(_flag_updates(x, y, 0, result))
        upd["pc"] = nxt
        return [GuardedEffect(MTRUE, upd)]
    if t is LogicReg:
        op = {"and": "and", "orr": "or", "eor": "xor"}[instr.op]
        dst = _dest(instr.dst)
        upd = {dst: m(op, _read(instr.a), _read(instr.b))} if dst else {}
        upd["pc"] = nxt
        return [GuardedEffect(MTRUE, upd)]
    if t is MovWide:
        dst = _dest(instr.dst)
        upd = {}
        if dst is not None:
            imm = instr.imm16 << instr.shift
            if instr.op == "movz":
                upd[dst] = c64(imm)
            elif instr.op == "movn":
                upd[dst] = c64(~imm)
            else:
                keep = c64(~(0xFFFF << instr.shift))
                upd[dst] = m("or", m("and", MField(dst), keep), c64(imm))
        upd["pc"] = nxt
        return [GuardedEffect(MTRUE, upd)]
    if t is LdrStrUImm:
        base = _read(instr.base, sp=True)
        addr = m("add", base, c64(instr.offset)) if instr.offset else base
        guard = m("aligned", addr, width=instr.size // 8)
        upd = {}
        if instr.load:
            dst = _dest(instr.reg)
            if dst is not None:
                val = m("load", MField("mem"), addr, width=instr.size)
                upd[dst] = val if instr.size == 64 else m("zext", val, width=64)
        else:
            val = _read(instr.reg)
            if instr.size == 32:
                val = m("trunc", val, width=32) if type(val) is not MConst else MConst(32, 0)
            upd["mem"] = m("store", MField("mem"), addr, val, width=instr.size)
        upd["pc"] = nxt
        return [GuardedEffect(guard, upd)]
    if t is B:
        upd = {"r30": nxt} if instr.link else {}
        upd["pc"] = c64(at + instr.offset)
        return [GuardedEffect(MTRUE, upd)]
    if t is BCond:
        g = cond_guard(instr.cond)
        target = c64(at + instr.offset)
        if g == MTRUE:
            return [GuardedEffect(MTRUE, {"pc": target})]
        return [GuardedEffect(g, {"pc": target}), GuardedEffect(m("not", g), {"pc": nxt})]
    if t is Cbz:
        x = _read(instr.reg)
        if instr.size == 32:
            x = m("trunc", x, width=32) if type(x) is not MConst else MConst(32, 0)
        zero = m("eq", x, MConst(instr.size, 0))
        g = m("not", zero) if instr.nonzero else zero
        return [
            GuardedEffect(g, {"pc": c64(at + instr.offset)}),
            GuardedEffect(m("not", g), {"pc": nxt}),
        ]
    if t is Ret:
        target = _read(instr.reg)
        return [GuardedEffect(m("aligned", target, width=4), {"pc": target})]
    if t is Nop:
        return [GuardedEffect(MTRUE, {"pc": nxt})]
    raise ValueError(f"no step cases for {instr!r}")


# --------------------------------------------------------------------------
# Interpreter


@dataclass(frozen=True)
class Stuck:
    """The machine cannot step: the word does not decode, or no guard holds."""

    reason: str  # "undecodable" | "unpredictable"
    detail: str = ""

    UNDECODABLE: ClassVar[str] = "undecodable"
    UNPREDICTABLE: ClassVar[str] = "unpredictable"


def mach_step(s: MachState) -> MachState | Stuck:
    if s.pc % 4:
        return Stuck(Stuck.UNPREDICTABLE, f"misaligned pc {s.pc:#x}")
    word = s.fetch()
    instr = decode(word, s.pc)
    if type(instr) is Unsupported:
        return Stuck(Stuck.UNDECODABLE, f"{word:#010x} at {s.pc:#x}")
    for case in step_cases(instr, s.pc):
        if case.holds(s):
            return case.apply(s)
    return Stuck(Stuck.UNPREDICTABLE, f"no guard of '{instr}' holds at {s.pc:#x}")


def mach_step_traced(s: MachState) -> tuple[MachState | Stuck, GuardedEffect | None]:
    """Like ``mach_step`` but also returns the effect that fired."""
    if s.pc % 4:
        return Stuck(Stuck.UNPREDICTABLE, f"misaligned pc {s.pc:#x}"), None
    word = s.fetch()
    instr = decode(word, s.pc)
    if type(instr) is Unsupported:
        return Stuck(Stuck.UNDECODABLE, f"{word:#010x} at {s.pc:#x}"), None
    for case in step_cases(instr, s.pc):
        if case.holds(s):
            return case.apply(s), case
    return Stuck(Stuck.UNPREDICTABLE, f"no guard of '{instr}' holds at {s.pc:#x}"), None


# --------------------------------------------------------------------------
# Encoders (for fixtures and tests)


def enc_add_imm(rd: int, rn: int, imm12: int, *, sub=False, setflags=False, shift12=False) -> int:
    return (1 << 31) | (int(sub) << 30) | (int(setflags) << 29) | (0b100010 << 23) | (int(shift12) << 22) | ((imm12 & 0xFFF) << 10) | (rn << 5) | rd


def enc_add_reg(rd: int, rn: int, rm: int, *, sub=False, setflags=False) -> int:
    return (1 << 31) | (int(sub) << 30) | (int(setflags) << 29) | (0b01011 << 24) | (rm << 16) | (rn << 5) | rd


def enc_logic(op: str, rd: int, rn: int, rm: int) -> int:
    opc = ("and", "orr", "eor").index(op)
    return (1 << 31) | (opc << 29) | (0b01010 << 24) | (rm << 16) | (rn << 5) | rd


def enc_movw(op: str, rd: int, imm16: int, shift: int = 0) -> int:
    opc = {"movn": 0, "movz": 2, "movk": 3}[op]
    return (1 << 31) | (opc << 29) | (0b100101 << 23) | ((shift // 16) << 21) | ((imm16 & 0xFFFF) << 5) | rd


def enc_ldst(load: bool, size: int, rt: int, rn: int, offset: int) -> int:
    scale = 3 if size == 64 else 2
    if offset % (1 << scale) or not 0 <= offset >> scale < 4096:
        raise ValueError(f"offset {offset} not encodable for {size}-bit access")
    return ((scale) << 30) | (0b111001 << 24) | (int(load) << 22) | ((offset >> scale) << 10) | (rn << 5) | rt


def enc_b(offset: int, link: bool = False) -> int:
    return (int(link) << 31) | (0b00101 << 26) | ((offset >> 2) & 0x3FFFFFF)


def enc_bcond(cond: int | str, offset: int) -> int:
    if isinstance(cond, str):
        cond = COND_NAMES.index(cond)
    return (0b01010100 << 24) | (((offset >> 2) & 0x7FFFF) << 5) | cond


def enc_cbz(rt: int, offset: int, *, nonzero=False, size=64) -> int:
    return (int(size == 64) << 31) | (0b011010 << 25) | (int(nonzero) << 24) | (((offset >> 2) & 0x7FFFF) << 5) | rt


def enc_ret(rn: int = 30) -> int:
    return 0xD65F0000 | (rn << 5)


NOP = 0xD503201F
