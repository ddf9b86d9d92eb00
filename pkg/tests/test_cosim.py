import pytest

from birlift import isa, smt
from birlift.cosim import (
    ACCEPT_MEMR,
    ACCEPT_STUCK,
    RELATED,
    MISMATCH,
    Mutant,
    block_equivalence_formula,
    check_all_instructions,
    check_instruction,
    check_program,
    classify_step,
    enumerate_mutants,
    make_related,
    mutant_equivalent,
    related,
    run_mutants,
    sample_mutants,
    score_mutants,
    unrelate,
)
from birlift.fixtures import forms_program, sample_machine_state, sample_sequence
from birlift.isa import MachState, enc_ldst
from birlift.lifter import lift_program
from birlift.syntax import Assign, BinOp, BinOpKind, Block, Word

AT = 0x1000000C


def regs(**vals):
    r = [0] * 31
    for k, v in vals.items():
        r[int(k[1:])] = v
    return tuple(r)


def test_make_related():
    s = MachState(r=regs(r0=5), n=True, v=False, pc=AT)
    bs = make_related(s).bir
    assert bs.env["R0"] == Word(64, 5)
    assert bs.env["N"] == Word(1, 1) and bs.env["V"] == Word(1, 0)
    assert bs.pc == AT
    assert related(s, bs)
    assert unrelate(bs) == s


def test_add_instruction_validates(backend):
    lp = lift_program(sample_sequence(AT - 8))
    rep = check_instruction(lp, AT - 8, trials=300, seed=1)
    assert rep.passed and rep.counts[RELATED] == 300


def test_store_into_memr_fails_acceptably():
    lp = lift_program(sample_sequence(AT - 4))  # str at AT
    s = MachState(pc=AT, sp=AT - 4, mem=lp.install())  # sp + 8 == AT + 4 lies inside memr
    assert classify_step(lp, s)[0] == ACCEPT_MEMR


def test_misaligned_store_is_stuck_on_both_sides():
    lp = lift_program(sample_sequence(AT - 4))
    s = MachState(pc=AT, sp=0x2001, mem=lp.install())
    assert classify_step(lp, s)[0] == ACCEPT_STUCK


def test_all_forms_validate():
    lp = lift_program(forms_program())
    rep = check_all_instructions(lp, trials=60, seed=2)
    assert rep.passed, rep.to_json()
    # every guarded case of every instruction was exercised
    for (at, _), part in zip(lp.source, rep.parts):
        assert set(range(len(lp.effects[at]))) <= set(part.case_hits), part.subject


def test_report_is_deterministic():
    lp = lift_program(sample_sequence())
    a = check_instruction(lp, 0x1000000C, trials=50, seed=9).to_dict()
    b = check_instruction(lp, 0x1000000C, trials=50, seed=9).to_dict()
    assert a == b and "bounded" in a["note"]


def test_sample_sequence_program_lockstep():
    lp = lift_program(sample_sequence())
    rep = check_program(lp, steps=3, trials=100, seed=0)
    assert rep.passed, rep.to_json()
    assert rep.counts[RELATED] > 0 and rep.counts["bir_first_related"] > 0


def test_self_modification_is_acceptable_by_failure():
    base = 0x1000
    # str x0, [x1]; nop -- with x1 pointing at the program itself
    words = [(base, enc_ldst(False, 64, 0, 1, 0)), (base + 4, isa.NOP)]
    lp = lift_program(words)
    s = MachState(pc=base, r=regs(r0=0xFFFF, r1=base), mem=lp.install(), sp=0x8000)
    rep = check_program(lp, steps=2, states=[s])
    assert rep.passed
    assert rep.counts["acceptable_self_modification"] == 1


def test_injected_mismatch_is_found():
    lp = lift_program(sample_sequence(AT - 8))
    add = lp.program[AT - 8]
    bad = Block(add.label, (Assign("R0", BinOp(BinOpKind.SUB, *add.stmts[0].expr.children())),), add.cf)
    (res,) = run_mutants(lp, [Mutant(AT - 8, "add->sub", (bad,))], trials=1000)
    assert res.killed and res.trials_used < 1000
    assert res.counterexample["verdict"] == MISMATCH


def test_mutant_enumeration_is_deterministic():
    lp = lift_program(forms_program())
    pool = enumerate_mutants(lp)
    assert len(pool) > 100
    assert [m.description for m in sample_mutants(lp, 50)] == [m.description for m in sample_mutants(lp, 50)]


def test_equivalence_formula_for_identical_block():
    lp = lift_program(sample_sequence())
    b = lp.program[0x1000000C]
    f = block_equivalence_formula(b, b)
    assert f is not None


@pytest.mark.skipif(not smt.solver_available(), reason="no SMT solver")
def test_equivalent_mutant_is_proved():
    lp = lift_program(sample_sequence(AT - 8))
    add = lp.program[AT - 8]
    x, y = add.stmts[0].expr.children()
    # commuting the operands changes the syntax but not the behaviour
    swapped = Block(add.label, (Assign("R0", BinOp(BinOpKind.ADD, y, x)),), add.cf)
    assert mutant_equivalent(lp, Mutant(AT - 8, "commute", (swapped,))) is True
    broken = Block(add.label, (Assign("R0", BinOp(BinOpKind.SUB, x, y)),), add.cf)
    assert mutant_equivalent(lp, Mutant(AT - 8, "sub", (broken,))) is False


@pytest.mark.skipif(not smt.solver_available(), reason="no SMT solver")
def test_mutation_score_small():
    lp = lift_program(sample_sequence())
    mutants = sample_mutants(lp, 8, seed=0)
    score = score_mutants(lp, mutants, trials=2000)
    d = score.to_dict()
    assert d["mutants"] == 8 and d["solver_used"]
    assert score.adjusted_rate >= score.raw_rate


def test_sample_machine_state_fixture():
    s = sample_machine_state()
    assert s.pc % 4 == 0
