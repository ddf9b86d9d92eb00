"""Translation validation by co-simulation.

The lifted BIR program and the machine interpreter are run side by side
from related states.  A trial passes when both end in related states with
the protected region untouched, or when BIR fails and the machine either
got stuck or wrote into the protected region.  Passing trials are evidence
for the simulation property, never a proof of it.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable

from . import isa
from .isa import GuardedEffect, MachState, MConst, MExpr, MField, MOp, Stuck
from .lifter import SIM_TYPES, LiftedProgram, MemRegion, SIM
from .sem import BirState, weak_exec_step
from .syntax import (
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
    Expr,
    Jmp,
    Memory,
    Program,
    Word,
    type_of_value,
)

MASK64 = (1 << 64) - 1
BOUNDED_NOTE = (
    "bounded evidence: sampled trials support the simulation property for "
    "the states tried; this is not a certificate"
)

# trial outcome classes
RELATED = "related"
ACCEPT_STUCK = "acceptable_stuck"
ACCEPT_MEMR = "acceptable_memr_write"
MISMATCH = "mismatch"
TYPE_ERR = "type_error"
DIVERGE = "diverged"
FAILURES = (MISMATCH, TYPE_ERR, DIVERGE)


# --------------------------------------------------------------------------
# Relating states


@dataclass(frozen=True)
class RelatedPair:
    mach: MachState
    bir: BirState


def make_related(mach: MachState) -> RelatedPair:
    env = {SIM.var(f"r{i}"): Word(64, v) for i, v in enumerate(mach.r)}
    env["SP"] = Word(64, mach.sp)
    for f in isa.FLAG_NAMES:
        env[SIM.var(f)] = Word(1, int(getattr(mach, f)))
    env["MEM"] = mach.mem
    return RelatedPair(mach, BirState(env, mach.pc))


def unrelate(bs: BirState) -> MachState:
    """The unique machine state related to ``bs``."""
    env = bs.env
    for name, t in SIM_TYPES.items():
        if name not in env or type_of_value(env[name]) is not t:
            raise ValueError(f"BIR state lacks a {t!r} value for {name}")
    if not isinstance(bs.pc, int):
        raise ValueError(f"BIR pc {bs.pc!r} is not an address")
    return MachState(
        r=tuple(env[f"R{i}"].bits for i in range(31)),
        sp=env["SP"].bits,
        pc=bs.pc,
        n=bool(env["N"].bits),
        z=bool(env["Z"].bits),
        c=bool(env["C"].bits),
        v=bool(env["V"].bits),
        mem=env["MEM"],
    )


def mismatched_fields(mach: MachState, bs: BirState) -> list[str]:
    """Mapped fields on which ``bs`` and ``mach`` disagree (empty iff related)."""
    out = []
    env = bs.env
    for i, v in enumerate(mach.r):
        w = env.get(f"R{i}")
        if type(w) is not Word or w.width != 64 or w.bits != v:
            out.append(f"R{i}")
    w = env.get("SP")
    if type(w) is not Word or w.width != 64 or w.bits != mach.sp:
        out.append("SP")
    for f in isa.FLAG_NAMES:
        w = env.get(SIM.var(f))
        if type(w) is not Word or w.width != 1 or w.bits != int(getattr(mach, f)):
            out.append(SIM.var(f))
    if env.get("MEM") != mach.mem:
        out.append("MEM")
    if bs.pc != mach.pc:
        out.append("pc")
    return out


def related(mach: MachState, bs: BirState) -> bool:
    return not mismatched_fields(mach, bs)


def memr_bytes(mem: Memory, memr: MemRegion) -> dict[int, int]:
    if len(mem.data) < 4 * sum(hi - lo for lo, hi in memr.intervals):
        return {a: b for a, b in mem.data.items() if memr.contains(a)}
    get = mem.data.get
    return {a: get(a) for a in memr.addresses() if get(a)}


def describe_state(s: MachState) -> dict:
    regs = {f"r{i}": f"{v:#x}" for i, v in enumerate(s.r) if v}
    return {
        "pc": f"{s.pc:#x}",
        "sp": f"{s.sp:#x}",
        "regs": regs,
        "nzcv": "".join(str(int(getattr(s, f))) for f in isa.FLAG_NAMES),
        "mem": {f"{a:#x}": f"{b:#04x}" for a, b in sorted(s.mem.data.items())[:64]},
    }


# --------------------------------------------------------------------------
# Reports


@dataclass
class ValidationReport:
    subject: str
    trials: int
    seed: int
    counts: Counter = field(default_factory=Counter)
    case_hits: Counter = field(default_factory=Counter)
    counterexamples: list[dict] = field(default_factory=list)
    parts: list[ValidationReport] = field(default_factory=list)
    max_counterexamples: int = 5

    @property
    def failures(self) -> int:
        own = sum(self.counts[k] for k in FAILURES)
        return own + sum(p.failures for p in self.parts)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def total_counts(self) -> Counter:
        out = Counter(self.counts)
        for p in self.parts:
            out.update(p.total_counts())
        return out

    def all_counterexamples(self) -> list[dict]:
        return self.counterexamples + [cx for p in self.parts for cx in p.all_counterexamples()]

    def record(self, verdict: str, detail: dict | None = None) -> None:
        self.counts[verdict] += 1
        if verdict in FAILURES and detail is not None:
            if len(self.counterexamples) < self.max_counterexamples:
                self.counterexamples.append({"verdict": verdict, **detail})

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "counts": dict(sorted(self.counts.items())),
            "case_hits": {str(k): v for k, v in sorted(self.case_hits.items(), key=lambda kv: str(kv[0]))},
            "counterexamples": self.counterexamples,
            "parts": [p.to_dict() for p in self.parts],
            "note": BOUNDED_NOTE,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


# --------------------------------------------------------------------------
# Guard-directed state generation

_EDGE = (
    0,
    1,
    2,
    0x7F,
    0x80,
    0xFF,
    0xFFFFFFFF,
    0x1_0000_0000,
    0xFFFFFFFF_00000000,
    1 << 63,
    (1 << 63) - 1,
    MASK64,
    MASK64 - 1,
)


_BLANK = MachState()


def _rand_word(rng: random.Random) -> int:
    k = rng.random()
    if k < 0.45:
        return rng.getrandbits(64)
    if k < 0.65:
        return rng.choice(_EDGE)
    if k < 0.8:
        return rng.getrandbits(8)
    if k < 0.9:
        return rng.getrandbits(32)
    return (rng.choice(_EDGE) + rng.randint(-2, 2)) & MASK64


def _address_exprs(cases: Iterable[GuardedEffect]) -> list[tuple[MExpr, int]]:
    """Address expressions (with access size in bytes) mentioned by ``cases``."""
    out: list[tuple[MExpr, int]] = []

    def walk(e: MExpr) -> None:
        if type(e) is MOp:
            if e.op == "aligned":
                out.append((e.args[0], e.width))
            elif e.op in ("load", "store"):
                out.append((e.args[1], e.width // 8))
            for a in e.args:
                walk(a)

    for k in cases:
        walk(k.guard)
        for e in k.updates.values():
            walk(e)
    seen: list[tuple[MExpr, int]] = []
    for x in out:
        if x not in seen:
            seen.append(x)
    return seen


def _base_field(e: MExpr) -> tuple[str, int] | None:
    """For ``f`` or ``f + const`` return ``(f, const)``."""
    if type(e) is MField and e.name != "mem":
        return e.name, 0
    if type(e) is MOp and e.op == "add" and type(e.args[0]) is MField and type(e.args[1]) is MConst:
        return e.args[0].name, e.args[1].value
    return None


def _interesting_addresses(rng: random.Random, size: int, memr: MemRegion, entries) -> int:
    k = rng.random()
    lo, hi = memr.intervals[rng.randrange(len(memr.intervals))]
    if k < 0.35:
        # a data area away from the program
        return (0x7FFF_0000 + 8 * rng.randrange(0x2000)) & MASK64
    if k < 0.55:
        # around the edges of the protected region, aligned or not
        edge = rng.choice((lo, hi))
        return (edge + rng.randint(-2 * size, 2 * size)) & MASK64
    if k < 0.65:
        return rng.choice(sorted(entries))
    if k < 0.75:
        return (lo + rng.randrange(max(1, hi - lo))) & MASK64
    if k < 0.85:
        return (MASK64 - rng.randrange(4 * size)) & MASK64
    a = _rand_word(rng)
    if rng.random() < 0.5:
        a &= ~(size - 1) & MASK64
    return a


@dataclass(frozen=True)
class TrialPlan:
    """What the generator aims at for one instruction.

    ``addresses`` lists ``(register, constant offset, access size)`` for each
    ``reg + const`` address; ``boundaries`` are register values next to the
    carry, overflow and zero boundaries for the instruction's constants.
    """

    addresses: tuple[tuple[str, int, int], ...]
    boundaries: tuple[int, ...]


def _constants(e: MExpr, out: set[int]) -> None:
    if type(e) is MConst and e.width == 64:
        out.add(e.value)
    elif type(e) is MOp:
        for a in e.args:
            _constants(a, out)


def make_plan(cases: list[GuardedEffect]) -> TrialPlan:
    addrs = []
    for e, size in _address_exprs(cases):
        bf = _base_field(e)
        if bf is not None and bf[0] != "pc":
            addrs.append((bf[0], bf[1], size))
    consts: set[int] = set()
    for k in cases:
        _constants(k.guard, consts)
        for f, e in k.updates.items():
            if f != "pc":
                _constants(e, consts)
    bounds: set[int] = set()
    for k in consts:
        for edge in (0, 1 << 63):
            for d in (-1, 0, 1):
                bounds.add((edge - k + d) & MASK64)
                bounds.add((edge + k + d) & MASK64)
    return TrialPlan(tuple(addrs), tuple(sorted(bounds)))


def random_state(
    rng: random.Random,
    at: int,
    lp: LiftedProgram,
    plan: TrialPlan,
) -> MachState:
    regs = [_rand_word(rng) for _ in range(31)]
    if plan.boundaries:
        for i in range(31):
            if rng.random() < 0.15:
                regs[i] = rng.choice(plan.boundaries)
    sp = _rand_word(rng) if rng.random() < 0.3 else (0x7FFF_F000 - 16 * rng.randrange(256))
    flags = rng.getrandbits(4)
    mem = lp.install()
    if plan.addresses:
        data = dict(mem.data)
        for name, off, size in plan.addresses:
            addr = _interesting_addresses(rng, size, lp.memr, lp.entry_labels)
            base = (addr - off) & MASK64
            if name == "sp":
                sp = base
            else:
                regs[int(name[1:])] = base
            for i in range(-8, size + 8):
                a = (addr + i) & MASK64
                if lp.memr.contains(a):
                    continue
                b = rng.getrandbits(8) if rng.random() < 0.8 else 0
                if b:
                    data[a] = b
                else:
                    data.pop(a, None)
        mem = Memory._raw(64, data)
    return MachState(
        tuple(regs), sp, at, bool(flags & 1), bool(flags & 2), bool(flags & 4), bool(flags & 8), mem
    )


def _holding_case(cases: list[GuardedEffect], s: MachState) -> int | None:
    for j, k in enumerate(cases):
        if k.holds(s):
            return j
    return None


def _targets(cases: list[GuardedEffect]) -> list[int | None]:
    guards = [k.guard for k in cases]
    out: list[int | None] = list(range(len(cases)))
    if not (any(g == isa.MTRUE for g in guards) or (len(guards) == 2 and guards[1] == isa.m("not", guards[0]))):
        out.append(None)
    return out


def _trial_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"{seed}:{index}")


# --------------------------------------------------------------------------
# Single-instruction validation


def classify_step(
    lp: LiftedProgram, s: MachState, program: Program | None = None
) -> tuple[str, str]:
    """Run one instruction from ``s`` on both sides; returns ``(verdict, reason)``."""
    program = program or lp.program
    s2, case = isa.mach_step_traced(s)
    pair = make_related(s)
    ls = set(lp.entry_labels)
    if type(s2) is MachState:
        ls.add(s2.pc)
    res = weak_exec_step(program, pair.bir, ls, fuel=10_000)
    if res is DIVERGED:
        return DIVERGE, "BIR did not reach an instruction label"
    if res.pc is TYPE_ERROR:
        return TYPE_ERR, "BIR reached a type error"
    if type(s2) is Stuck:
        if res.pc is FAILED:
            return ACCEPT_STUCK, ""
        return MISMATCH, f"machine stuck ({s2.reason}) but BIR reached {res.pc!r}"
    if res.pc is FAILED:
        if any(lp.memr.overlaps(a, n) for a, n in case.writes(s)):
            return ACCEPT_MEMR, ""
        return MISMATCH, "BIR failed but the machine stepped without touching memr"
    bad = mismatched_fields(s2, res)
    if bad:
        return MISMATCH, "final states not related on " + ", ".join(bad)
    mem2 = res.env["MEM"]
    if mem2 is not s.mem and memr_bytes(mem2, lp.memr) != memr_bytes(s.mem, lp.memr):
        return MISMATCH, "protected region modified"
    return RELATED, ""


def check_instruction(
    lp: LiftedProgram,
    at: int,
    trials: int = 1000,
    seed: int = 0,
    *,
    program: Program | None = None,
    stop_on_failure: bool = False,
    attempts: int = 64,
) -> ValidationReport:
    """Guard-directed random co-simulation of the instruction at ``at``."""
    if at not in lp.entry_labels:
        raise ValueError(f"{at:#x} is not an instruction label")
    cases = lp.effects.get(at)
    if cases is None:
        raise ValueError(f"no supported instruction at {at:#x}")
    word = dict(lp.source)[at]
    rep = ValidationReport(f"{at:#x}: {isa.decode(word, at)}", trials, seed)
    targets = _targets(cases)
    plan = make_plan(cases)
    for t in range(trials):
        rng = _trial_rng(seed, t)
        want = targets[t % len(targets)]
        s = random_state(rng, at, lp, plan)
        for _ in range(attempts):
            if _holding_case(cases, s) == want:
                break
            s = random_state(rng, at, lp, plan)
        got = _holding_case(cases, s)
        rep.case_hits["stuck" if got is None else got] += 1
        verdict, reason = classify_step(lp, s, program)
        rep.record(verdict, {"state": describe_state(s), "reason": reason} if verdict in FAILURES else None)
        if stop_on_failure and verdict in FAILURES:
            rep.trials = t + 1
            break
    return rep


def check_all_instructions(lp: LiftedProgram, trials: int = 1000, seed: int = 0) -> ValidationReport:
    rep = ValidationReport("all instructions", trials, seed)
    for at, _ in lp.source:
        if at in lp.effects:
            rep.parts.append(check_instruction(lp, at, trials, seed))
    return rep


# --------------------------------------------------------------------------
# Whole-program lockstep validation


def _program_state(rng: random.Random, lp: LiftedProgram, entry: int) -> MachState:
    regs = tuple(_rand_word(rng) for _ in range(31))
    sp = 0x7FFF_F000 - 16 * rng.randrange(256)
    flags = rng.getrandbits(4)
    return MachState(
        r=regs, sp=sp, pc=entry, mem=lp.install(),
        n=bool(flags & 1), z=bool(flags & 2), c=bool(flags & 4), v=bool(flags & 8),
    )


def _static_exits(p: Program) -> set:
    out = set()
    for b in p.blocks:
        cf = b.cf
        for e in (cf.target,) if type(cf) is Jmp else (cf.then_target, cf.else_target):
            if type(e) is Const and e.bits not in p.index:
                out.add(e.bits)
    return out


def check_program(
    lp: LiftedProgram,
    steps: int = 10,
    trials: int = 100,
    seed: int = 0,
    *,
    states: Iterable[MachState] | None = None,
) -> ValidationReport:
    """Lockstep co-simulation for up to ``steps`` instructions in both directions.

    Machine first: after every machine step BIR must reach a related state
    (or fail acceptably).  BIR first: every state BIR reaches at an
    instruction label must be related to the machine's next state.
    """
    entry = lp.entry if lp.entry is not None else lp.source[0][0]
    rep = ValidationReport(f"program at {entry:#x}, {steps} steps", trials, seed)
    if states is None:
        starts = (_program_state(_trial_rng(seed, t), lp, entry) for t in range(trials))
    else:
        starts = iter(states)
    exits = _static_exits(lp.program)
    for s in starts:
        _lockstep_machine_first(lp, s, steps, rep)
        _lockstep_bir_first(lp, s, steps, rep, exits)
    return rep


def _lockstep_machine_first(lp: LiftedProgram, s: MachState, steps: int, rep: ValidationReport) -> None:
    for k in range(steps):
        if s.pc not in lp.entry_labels or s.pc in lp.unsupported:
            rep.case_hits["left_program"] += 1
            return
        verdict, reason = classify_step(lp, s)
        if verdict == ACCEPT_MEMR:
            verdict = "acceptable_self_modification"
        rep.record(verdict, {"state": describe_state(s), "step": k, "reason": reason}
                   if verdict in FAILURES else None)
        if verdict != RELATED:
            return
        s = isa.mach_step(s)
    rep.case_hits["completed"] += 1


def _lockstep_bir_first(
    lp: LiftedProgram, s: MachState, steps: int, rep: ValidationReport, exits: set
) -> None:
    bs = make_related(s).bir
    ls = set(lp.entry_labels) | exits
    for k in range(steps):
        if bs.pc not in lp.entry_labels or bs.pc in lp.unsupported:
            return
        nxt = weak_exec_step(lp.program, bs, ls, fuel=10_000)
        if nxt is DIVERGED or nxt.pc is TYPE_ERROR:
            rep.record(DIVERGE if nxt is DIVERGED else TYPE_ERR,
                       {"state": describe_state(unrelate(bs)), "step": k, "direction": "bir_first"})
            return
        if nxt.pc is FAILED:
            return
        m = isa.mach_step(unrelate(bs))
        if type(m) is Stuck or not related(m, nxt):
            rep.record(MISMATCH, {
                "state": describe_state(unrelate(bs)), "step": k, "direction": "bir_first",
                "reason": "machine replay does not match the BIR step",
            })
            return
        rep.counts["bir_first_related"] += 1
        bs = BirState({n: v for n, v in nxt.env.items() if n in SIM_TYPES}, nxt.pc)


# --------------------------------------------------------------------------
# Mutation harness


@dataclass(frozen=True)
class Mutant:
    at: int
    description: str
    blocks: tuple[Block, ...]


_SWAPS = {
    BinOpKind.ADD: BinOpKind.SUB,
    BinOpKind.SUB: BinOpKind.ADD,
    BinOpKind.AND: BinOpKind.OR,
    BinOpKind.OR: BinOpKind.AND,
    BinOpKind.XOR: BinOpKind.OR,
    BinOpKind.ULT: BinOpKind.SLT,
    BinOpKind.SLT: BinOpKind.ULT,
    BinOpKind.EQ: BinOpKind.ULT,
}


def _expr_mutations(e: Expr) -> list[tuple[str, Expr]]:
    """Single-point mutations of ``e`` (operator swaps and constant bumps)."""
    from .core import rebuild

    out: list[tuple[str, Expr]] = []
    if type(e) is BinOp and e.op in _SWAPS:
        out.append((f"{e.op.name.lower()}->{_SWAPS[e.op].name.lower()}", BinOp(_SWAPS[e.op], e.left, e.right)))
    if type(e) is Const and e.width > 1:
        out.append((f"const {e.bits:#x}+1", Const(e.width, (e.bits + 1) & ((1 << e.width) - 1))))
    if type(e) is Const and e.width == 1:
        out.append(("flip boolean", Const(1, 1 - e.bits)))
    kids = e.children()
    for i, ch in enumerate(kids):
        for desc, m in _expr_mutations(ch):
            new = list(kids)
            new[i] = m
            out.append((desc, rebuild(e, new)))
    return out


def _stmt_mutations(block: Block) -> list[tuple[str, Block]]:
    out: list[tuple[str, Block]] = []
    stmts = list(block.stmts)
    for i, s in enumerate(stmts):
        kind = "assign" if type(s) is Assign else "assert"
        if type(s) is Assign:
            rest = stmts[:i] + stmts[i + 1 :]
            out.append((f"drop {kind} #{i}", replace(block, stmts=tuple(rest))))
        e = s.expr if type(s) is Assign else s.cond
        for desc, m in _expr_mutations(e):
            new = Assign(s.var, m) if type(s) is Assign else Assert(m)
            out.append((f"{desc} in {kind} #{i}", replace(block, stmts=tuple(stmts[:i] + [new] + stmts[i + 1 :]))))
    cf = block.cf
    if type(cf) is CJmp:
        out.append(("swap cjmp targets", replace(block, cf=CJmp(cf.cond, cf.else_target, cf.then_target))))
        for desc, m in _expr_mutations(cf.cond):
            out.append((f"{desc} in cjmp condition", replace(block, cf=CJmp(m, cf.then_target, cf.else_target))))
        for desc, m in _expr_mutations(cf.then_target):
            out.append((f"{desc} in cjmp target", replace(block, cf=CJmp(cf.cond, m, cf.else_target))))
    else:
        for desc, m in _expr_mutations(cf.target):
            out.append((f"{desc} in jump target", replace(block, cf=Jmp(m))))
    return out


def _fragment_labels(lp: LiftedProgram, at: int) -> list:
    return [b.label for b in lp.program.blocks if b.label == at or (isinstance(b.label, str) and b.label.startswith(f"{at}-"))]


def enumerate_mutants(lp: LiftedProgram) -> list[Mutant]:
    out: list[Mutant] = []
    for at, _ in lp.source:
        if at not in lp.effects:
            continue
        for label in _fragment_labels(lp, at):
            block = lp.program[label]
            for desc, mb in _stmt_mutations(block):
                out.append(Mutant(at, f"{at:#x} block {label}: {desc}", (mb,)))
    return out


def sample_mutants(lp: LiftedProgram, count: int = 50, seed: int = 0) -> list[Mutant]:
    pool = enumerate_mutants(lp)
    rng = random.Random(seed)
    if len(pool) <= count:
        return pool
    return rng.sample(pool, count)


def mutated_program(lp: LiftedProgram, mutant: Mutant) -> Program:
    swap = {b.label: b for b in mutant.blocks}
    return Program(tuple(swap.get(b.label, b) for b in lp.program.blocks))


@dataclass
class MutationResult:
    mutant: Mutant
    killed: bool
    trials_used: int
    counterexample: dict | None = None


def run_mutants(
    lp: LiftedProgram, mutants: list[Mutant], trials: int = 10_000, seed: int = 0
) -> list[MutationResult]:
    out = []
    for mu in mutants:
        prog = mutated_program(lp, mu)
        rep = check_instruction(lp, mu.at, trials, seed, program=prog, stop_on_failure=True)
        cex = rep.counterexamples[0] if rep.counterexamples else None
        out.append(MutationResult(mu, not rep.passed, rep.trials, cex))
    return out


# --------------------------------------------------------------------------
# Equivalent mutants
#
# A mutant that changes one block is harmless when, from every environment,
# the mutated block fails exactly when the original does and otherwise
# assigns the same values and jumps to the same target.  That is a
# sufficient condition for the whole fragment to behave identically, so a
# proof excludes the mutant from the score; anything unproved stays in.


@dataclass(frozen=True)
class BlockSummary:
    fails: Expr  # Reg1: some assert is violated
    assigned: dict  # var -> final value, over the entry environment
    target: tuple  # ("labels", cond | None, then, else) or ("expr", expr)


def summarize_block(block: Block) -> BlockSummary:
    from .core import substitute
    from .syntax import FALSE_E, lnot, lor

    env: dict[str, Expr] = {}
    fails: Expr = FALSE_E
    for s in block.stmts:
        if type(s) is Assign:
            env[s.var] = substitute(s.expr, env)
        else:
            fails = lor(fails, lnot(substitute(s.cond, env)))
    cf = block.cf
    if type(cf) is Jmp:
        target = (None, substitute(cf.target, env), None)
    else:
        target = (substitute(cf.cond, env), cf.then_target, cf.else_target)
    return BlockSummary(fails, env, target)


def _target_term(summary: BlockSummary, ids: dict) -> Expr | None:
    from .syntax import Ite, LabelConst

    cond, t1, t2 = summary.target
    const = (Const, LabelConst)

    def key(t):
        return ("c", t.bits) if type(t) is Const else ("l", t.name)

    if cond is None:
        if type(t1) in const:
            return Const(16, ids.setdefault(key(t1), len(ids)))
        return None
    if type(t1) in const and type(t2) in const:
        a = Const(16, ids.setdefault(key(t1), len(ids)))
        b = Const(16, ids.setdefault(key(t2), len(ids)))
        return Ite(cond, a, b)
    return None


def block_equivalence_formula(orig: Block, mutant: Block) -> Expr | None:
    """Reg1 formula valid iff the two blocks are observationally identical.

    Returns None when the targets cannot be compared symbolically.
    """
    from .syntax import Var, conj, eq, implies, land, lnot

    a, b = summarize_block(orig), summarize_block(mutant)
    ids: dict = {}
    ta, tb = _target_term(a, ids), _target_term(b, ids)
    if ta is None or tb is None:
        # Computed jumps: compare the target expressions themselves.
        if a.target[0] is None and b.target[0] is None:
            ta, tb = a.target[1], b.target[1]
        else:
            return None
    same = [eq(ta, tb)]
    for v in sorted(set(a.assigned) | set(b.assigned)):
        same.append(eq(a.assigned.get(v, Var(v)), b.assigned.get(v, Var(v))))
    both_fail = eq(a.fails, b.fails)
    return land(both_fail, implies(lnot(a.fails), conj(same)))


def mutant_equivalent(lp: LiftedProgram, mutant: Mutant, solver: str | None = None, timeout: float = 30.0) -> bool | None:
    """True if proved equivalent, False if a distinguishing environment exists,
    None when undecided (no solver, timeout, or untranslatable)."""
    from . import smt

    typing = {**SIM_TYPES, **lp.declared}
    verdicts = []
    for mb in mutant.blocks:
        formula = block_equivalence_formula(lp.program[mb.label], mb)
        if formula is None:
            return None
        try:
            res = smt.prove_implication(Const(1, 1), formula, typing, solver, timeout)
        except smt.SolverNotFound:
            return None
        verdicts.append(res.status)
    if all(v == "proved" for v in verdicts):
        return True
    if any(v == "counterexample" for v in verdicts):
        return False
    return None


@dataclass
class MutationScore:
    results: list
    equivalent: list  # mutants proved equivalent
    solver_used: bool

    @property
    def total(self) -> int:
        return len(self.results)

    @property
    def killed(self) -> int:
        return sum(r.killed for r in self.results)

    @property
    def raw_rate(self) -> float:
        return self.killed / self.total if self.total else 1.0

    @property
    def adjusted_rate(self) -> float:
        """Kill rate over the mutants not proved equivalent."""
        eq_ids = {id(m) for m in self.equivalent}
        live = [r for r in self.results if id(r.mutant) not in eq_ids]
        if not live:
            return 1.0
        return sum(r.killed for r in live) / len(live)

    def to_dict(self) -> dict:
        eq_ids = {id(m) for m in self.equivalent}
        return {
            "mutants": self.total,
            "killed": self.killed,
            "proved_equivalent": len(self.equivalent),
            "raw_rate": self.raw_rate,
            "adjusted_rate": self.adjusted_rate,
            "solver_used": self.solver_used,
            "survivors": [
                {"mutant": r.mutant.description, "proved_equivalent": id(r.mutant) in eq_ids}
                for r in self.results
                if not r.killed
            ],
        }


def score_mutants(
    lp: LiftedProgram,
    mutants: list[Mutant],
    trials: int = 10_000,
    seed: int = 0,
    solver: str | None = None,
) -> MutationScore:
    """Run the mutants; try to prove survivors equivalent to the original."""
    from . import smt

    results = run_mutants(lp, mutants, trials, seed)
    have_solver = smt.solver_available(solver)
    equivalent = []
    if have_solver:
        for r in results:
            if not r.killed and mutant_equivalent(lp, r.mutant, solver):
                equivalent.append(r.mutant)
    return MutationScore(results, equivalent, have_solver)
