"""Lifting ARMv8 instructions to BIR fragments.

Each instruction at address ``a`` becomes one block labelled ``a`` plus,
when several guarded cases need their own bodies, internal blocks labelled
``"<a in decimal>-<j>"``.  Machine fields map to BIR variables by name:
``r<i>`` to ``R<i>``, ``sp`` to ``SP``, flags to ``N Z C V``, ``mem`` to
``MEM``; the machine pc is the BIR program counter.
"""

from __future__ import annotations

import bisect
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from . import isa
from .isa import GuardedEffect, MConst, MExpr, MField, MOp
from .syntax import (
    Assert,
    Assign,
    BinOp,
    BinOpKind,
    Block,
    BType,
    CJmp,
    Expr,
    Ite,
    Jmp,
    LabelConst,
    Load,
    Mem,
    Memory,
    Program,
    Reg,
    Store,
    UnOp,
    UnOpKind,
    Var,
    c,
    conj,
    eq,
    lnot,
    FALSE_E,
)

MASK64 = (1 << 64) - 1


class LiftError(Exception):
    pass


class UnsupportedInstruction(LiftError):
    def __init__(self, word: int, at: int) -> None:
        super().__init__(f"unsupported instruction {word:#010x} at {at:#x}")
        self.word = word
        self.at = at


# --------------------------------------------------------------------------
# Simulation relation


@dataclass(frozen=True)
class SimRelation:
    """Fixed bijection between machine fields and BIR variable names."""

    names: dict[str, str] = field(default_factory=lambda: dict(_SIM_NAMES))

    def var(self, fld: str) -> str:
        return self.names[fld]

    def field_of(self, var: str) -> str:
        return _SIM_INVERSE[var]

    @property
    def types(self) -> dict[str, BType]:
        return dict(SIM_TYPES)


_SIM_NAMES = {f"r{i}": f"R{i}" for i in range(31)}
_SIM_NAMES.update(sp="SP", n="N", z="Z", c="C", v="V", mem="MEM")
_SIM_INVERSE = {v: k for k, v in _SIM_NAMES.items()}
SIM_TYPES: dict[str, BType] = {
    v: (Mem(64) if f == "mem" else Reg(isa.field_width(f))) for f, v in _SIM_NAMES.items()
}
SIM = SimRelation()


# --------------------------------------------------------------------------
# Protected memory region


@dataclass(frozen=True)
class MemRegion:
    """Disjoint, sorted, half-open 64-bit address intervals ``[lo, hi)``."""

    intervals: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "intervals", _normalize(self.intervals))

    @classmethod
    def from_addresses(cls, addrs: Iterable[int], size: int = 4) -> MemRegion:
        return cls(tuple((a, a + size) for a in addrs))

    def contains(self, addr: int) -> bool:
        i = bisect.bisect_right(self.intervals, (addr, 1 << 65)) - 1
        return i >= 0 and addr < self.intervals[i][1]

    def overlaps(self, addr: int, nbytes: int) -> bool:
        return any(self.contains((addr + i) & MASK64) for i in range(nbytes))

    def addresses(self) -> Iterable[int]:
        for lo, hi in self.intervals:
            yield from range(lo, hi)

    def to_json(self) -> list[list[str]]:
        return [[f"{lo:#x}", f"{hi:#x}"] for lo, hi in self.intervals]

    @classmethod
    def from_json(cls, data) -> MemRegion:
        return cls(tuple((int(lo, 0), int(hi, 0)) for lo, hi in data))


def _normalize(ivs) -> tuple[tuple[int, int], ...]:
    out: list[list[int]] = []
    for lo, hi in sorted((lo, hi) for lo, hi in ivs if lo < hi):
        if not 0 <= lo and hi <= 1 << 64:
            raise ValueError(f"interval [{lo:#x}, {hi:#x}) outside the 64-bit space")
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return tuple((lo, hi) for lo, hi in out)


def outside_memr(addr: Expr, nbytes: int, memr: MemRegion) -> Expr:
    """BIR condition: the ``nbytes`` written at ``addr`` all lie outside ``memr``.

    Assumes the access does not wrap around the address space, which the
    alignment assertion that precedes every store guarantees.
    """
    last = addr if nbytes == 1 else BinOp(BinOpKind.ADD, addr, c(64, nbytes - 1))
    parts = []
    for lo, hi in memr.intervals:
        below = BinOp(BinOpKind.ULT, last, c(64, lo))
        if hi >= 1 << 64:
            parts.append(below)
        else:
            above = lnot(BinOp(BinOpKind.ULT, addr, c(64, hi)))
            parts.append(BinOp(BinOpKind.OR, below, above))
    return conj(parts)


# --------------------------------------------------------------------------
# Expression translation

_WORD_OPS = {
    "add": BinOpKind.ADD,
    "sub": BinOpKind.SUB,
    "and": BinOpKind.AND,
    "or": BinOpKind.OR,
    "xor": BinOpKind.XOR,
}


def translate_mach_expr(e: MExpr, sim: SimRelation = SIM) -> Expr:
    if type(e) is MConst:
        return c(e.width, e.value)
    if type(e) is MField:
        if e.name == "pc":
            raise LiftError("the machine pc has no BIR variable")
        return Var(sim.var(e.name))
    if type(e) is not MOp:
        raise LiftError(f"not a machine expression: {e!r}")
    op = e.op
    args = [translate_mach_expr(a, sim) for a in e.args]
    if op in _WORD_OPS:
        return BinOp(_WORD_OPS[op], args[0], args[1])
    if op == "not":
        return UnOp(UnOpKind.NOT, args[0])
    if op == "eq":
        return BinOp(BinOpKind.EQ, args[0], args[1])
    if op == "msb":
        return BinOp(BinOpKind.SLT, args[0], c(isa.mwidth(e.args[0]), 0))
    if op == "carry":
        x, y = args[0], args[1]
        cin = e.args[2]
        if type(cin) is not MConst:
            raise LiftError("carry-in must be a constant")
        if cin.value == 0:
            return BinOp(BinOpKind.ULT, UnOp(UnOpKind.NOT, x), y)
        return lnot(BinOp(BinOpKind.ULT, y, UnOp(UnOpKind.NOT, x)))
    if op == "overflow":
        x, y = args[0], args[1]
        w = isa.mwidth(e.args[0])
        r = BinOp(BinOpKind.ADD, x, y)
        if args[2] != c(1, 0):
            r = BinOp(BinOpKind.ADD, r, UnOp(UnOpKind.ZEXT, args[2], w))
        both = BinOp(
            BinOpKind.AND, BinOp(BinOpKind.XOR, x, r), BinOp(BinOpKind.XOR, y, r)
        )
        return BinOp(BinOpKind.SLT, both, c(w, 0))
    if op == "aligned":
        k = e.width
        if k & (k - 1):
            raise LiftError(f"alignment {k} is not a power of two")
        w = isa.mwidth(e.args[0])
        return eq(BinOp(BinOpKind.AND, args[0], c(w, k - 1)), c(w, 0))
    if op == "zext":
        return UnOp(UnOpKind.ZEXT, args[0], e.width)
    if op == "trunc":
        return UnOp(UnOpKind.TRUNC, args[0], e.width)
    if op == "ite":
        return Ite(args[0], args[1], args[2])
    if op == "load":
        return Load(args[0], args[1], e.width)
    if op == "store":
        return Store(args[0], args[1], args[2], e.width)
    raise LiftError(f"unsupported machine operator {op!r}")


# --------------------------------------------------------------------------
# Per-instruction template


def _is_true(g: MExpr) -> bool:
    return g == isa.MTRUE


def _exhaustive(guards: Sequence[MExpr]) -> bool:
    if any(_is_true(g) for g in guards):
        return True
    if len(guards) == 2:
        a, b = guards
        return b == isa.m("not", a) or a == isa.m("not", b)
    return False


def _disjunction(guards: Sequence[MExpr]) -> Expr:
    parts = [translate_mach_expr(g) for g in guards]
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = BinOp(BinOpKind.OR, p, out)
    return out


def _static_pc(case: GuardedEffect) -> int | None:
    e = case.updates["pc"]
    return e.value if type(e) is MConst else None


def _stores(e: MExpr | None) -> list[tuple[MExpr, int]]:
    out = []
    while type(e) is MOp and e.op == "store":
        out.append((e.args[1], e.width // 8))
        e = e.args[0]
    return out[::-1]


def case_body(case: GuardedEffect, memr: MemRegion) -> tuple[list, Jmp]:
    """Statements and final jump for one guarded case."""
    stmts: list = []
    for addr, n in _stores(case.updates.get("mem")):
        stmts.append(Assert(outside_memr(translate_mach_expr(addr), n, memr)))
    updates = {f: e for f, e in case.updates.items() if f != "pc"}
    reads = {f: isa.mfields(e) for f, e in updates.items()}
    needs_tmp = [f for f in updates if any(f in reads[g] for g in updates if g != f)]
    pc_e = case.updates["pc"]
    if type(pc_e) is MConst:
        jump = Jmp(c(64, pc_e.value))
    elif isa.mfields(pc_e) & set(updates):
        stmts.append(Assign("tmp_PC", translate_mach_expr(pc_e)))
        jump = Jmp(Var("tmp_PC"))
    else:
        jump = Jmp(translate_mach_expr(pc_e))
    for f in needs_tmp:
        stmts.append(Assign(f"tmp_{SIM.var(f)}", translate_mach_expr(updates[f])))
    for f, e in updates.items():
        if f not in needs_tmp:
            stmts.append(Assign(SIM.var(f), translate_mach_expr(e)))
    for f in needs_tmp:
        stmts.append(Assign(SIM.var(f), Var(f"tmp_{SIM.var(f)}")))
    return stmts, jump


def lift_effects(cases: Sequence[GuardedEffect], at: int, memr: MemRegion) -> list[Block]:
    """BIR fragment for the guarded cases of the instruction at ``at``."""
    if not cases:
        raise LiftError(f"no cases for instruction at {at:#x}")
    guards = [k.guard for k in cases]
    head: list = []
    if not _exhaustive(guards):
        head.append(Assert(_disjunction(guards)))
    if len(cases) == 1:
        stmts, jump = case_body(cases[0], memr)
        return [Block(at, tuple(head + stmts), jump)]

    blocks: list[Block] = []

    def case_target(j: int) -> Expr:
        case = cases[j]
        pc = _static_pc(case)
        if case.pc_only and pc is not None:
            return c(64, pc)
        stmts, jump = case_body(case, memr)
        label = f"{at}-{j + 1}"
        blocks.append(Block(label, tuple(stmts), jump))
        return LabelConst(label)

    targets = [case_target(j) for j in range(len(cases))]
    conds = [translate_mach_expr(g) for g in guards]
    # a chain of dispatch blocks for more than two cases
    n = len(cases)
    dispatch: list[Block] = []
    else_target = targets[-1]
    for j in range(n - 2, 0, -1):
        label = f"{at}-{n + j}"
        dispatch.insert(0, Block(label, (), CJmp(conds[j], targets[j], else_target)))
        else_target = LabelConst(label)
    first = Block(at, tuple(head), CJmp(conds[0], targets[0], else_target))
    return [first] + dispatch + blocks


def unsupported_block(word: int, at: int) -> Block:
    """Placeholder for an instruction outside the subset: it always fails."""
    return Block(at, (Assert(FALSE_E),), Jmp(c(64, at + 4)))


def lift_instruction(word: int, at: int, memr: MemRegion) -> list[Block]:
    if at % 4:
        raise LiftError(f"instruction address {at:#x} is not 4-aligned")
    instr = isa.decode(word, at)
    if type(instr) is isa.Unsupported:
        raise UnsupportedInstruction(word, at)
    return lift_effects(isa.step_cases(instr, at), at, memr)


# --------------------------------------------------------------------------
# Whole programs


@dataclass
class LiftedProgram:
    program: Program
    entry_labels: frozenset[int]
    memr: MemRegion
    source: list[tuple[int, int]]
    entry: int | None = None
    unsupported: list[int] = field(default_factory=list)
    effects: dict[int, list[GuardedEffect]] = field(default_factory=dict)
    declared: dict[str, BType] = field(default_factory=dict)
    _image: Memory | None = field(default=None, repr=False, compare=False)

    def metadata(self) -> dict:
        return {
            "entry": None if self.entry is None else f"{self.entry:#x}",
            "entry_labels": [f"{a:#x}" for a in sorted(self.entry_labels)],
            "memr": self.memr.to_json(),
            "unsupported": [f"{a:#x}" for a in self.unsupported],
            "source": [[f"{a:#x}", f"{w:#010x}"] for a, w in self.source],
        }

    def install(self, mem=None):
        """``mem`` (default: empty) with the instruction words stored little-endian."""
        if mem is None:
            if self._image is None:
                self._image = isa.install(Memory(64), self.source)
            return self._image
        return isa.install(mem, self.source)


def declared_types(p: Program) -> dict[str, BType]:
    """Types of the SimRelation variables and temporaries used by ``p``."""
    from .core import free_vars

    names: set[str] = set()
    for b in p.blocks:
        for s in b.stmts:
            if type(s) is Assign:
                names.add(s.var)
                names |= free_vars(s.expr)
            else:
                names |= free_vars(s.cond)
        cf = b.cf
        for e in (cf.target,) if type(cf) is Jmp else (cf.cond, cf.then_target, cf.else_target):
            names |= free_vars(e)
    out = {}
    for n in sorted(names):
        if n in SIM_TYPES:
            out[n] = SIM_TYPES[n]
        elif n.startswith("tmp_"):
            base = n[4:]
            out[n] = SIM_TYPES.get(base, Reg(64))
    return out


def lift_program(
    words: Sequence[tuple[int, int]],
    entry: int | None = None,
    *,
    strict: bool = False,
) -> LiftedProgram:
    """Lift ``(address, word)`` pairs.

    Unsupported words become always-failing blocks and are listed in
    ``unsupported``; with ``strict=True`` they raise instead.
    """
    words = [(int(a), int(w)) for a, w in words]
    if not words:
        raise LiftError("no instructions")
    addrs = [a for a, _ in words]
    seen: set[int] = set()
    for a in addrs:
        if a in seen:
            raise LiftError(f"duplicate instruction address {a:#x}")
        if a % 4:
            raise LiftError(f"instruction address {a:#x} is not 4-aligned")
        seen.add(a)
    if entry is not None and entry not in seen:
        raise LiftError(f"entry {entry:#x} is not an instruction address")
    memr = MemRegion.from_addresses(addrs)
    blocks: list[Block] = []
    unsupported: list[int] = []
    effects: dict[int, list[GuardedEffect]] = {}
    for a, w in words:
        instr = isa.decode(w, a)
        if type(instr) is isa.Unsupported:
            if strict:
                raise UnsupportedInstruction(w, a)
            unsupported.append(a)
            blocks.append(unsupported_block(w, a))
            continue
        cases = isa.step_cases(instr, a)
        effects[a] = cases
        blocks.extend(lift_effects(cases, a, memr))
    program = Program(tuple(blocks))
    return LiftedProgram(
        program=program,
        entry_labels=frozenset(addrs),
        memr=memr,
        source=words,
        entry=entry if entry is not None else addrs[0],
        unsupported=unsupported,
        effects=effects,
        declared=declared_types(program),
    )


def words_from_bytes(data: bytes, base: int) -> list[tuple[int, int]]:
    if len(data) % 4:
        raise LiftError(f"binary size {len(data)} is not a multiple of 4")
    return [
        (base + i, int.from_bytes(data[i : i + 4], "little")) for i in range(0, len(data), 4)
    ]
