"""Solver-versus-evaluator differential, shared by the unit and acceptance suites."""

import itertools
import random

from birlift import randgen, smt
from birlift.core import eval_expr
from birlift.syntax import TRUE, Mem, Memory, Reg, Word

TYPES = {"B": Reg(1), "X": Reg(8), "Y": Reg(8), "M": Mem(32)}
_BYTES = (0, 1, 0x7F, 0x80, 0xFF)


def sample_envs(rng, n=48):
    """A fixed grid corner plus random points; memory lives in a 4-byte window."""
    out = []
    for b, x, y in itertools.product((0, 1), (0, 0x80), (0, 0xFF)):
        out.append({"B": Word(1, b), "X": Word(8, x), "Y": Word(8, y), "M": Memory(32)})
    while len(out) < n:
        mem = {a: rng.choice(_BYTES) if rng.random() < 0.5 else rng.randrange(256) for a in range(4)}
        out.append({
            "B": Word(1, rng.randrange(2)),
            "X": Word(8, randgen._interesting(rng, 8)),
            "Y": Word(8, randgen._interesting(rng, 8)),
            "M": Memory(32, {a: v for a, v in mem.items() if v}),
        })
    return out


def random_formula(rng):
    gen = randgen.ExprGen(rng, TYPES, word_widths=(1, 8, 16, 32))
    return gen.expr(Reg(1), rng.randint(2, 4))


def differential(e, rng, solver=None):
    """Disagreements between the solver and ``eval_expr`` on ``e`` (empty when they agree).

    * a sat model must evaluate to true;
    * a point where evaluation is true rules out an unsat verdict;
    * one true and one false point, pinned exactly, must get the matching verdict.
    """
    problems = []
    res = smt.check_sat(e, TYPES, solver)
    if res.status == "unknown":
        return ["solver returned unknown"]
    envs = sample_envs(rng)
    values = [eval_expr(e, env) == TRUE for env in envs]
    if res.status == "sat":
        model = {n: res.model.get(n, Memory(32) if t.kind == "mem" else Word(t.width, 0)) for n, t in TYPES.items()}
        # a memory with a non-zero default byte stays textual; the pinned checks still cover it
        if all(isinstance(v, (Word, Memory)) for v in model.values()) and eval_expr(e, model) != TRUE:
            problems.append(f"model {model} does not satisfy the formula")
    elif any(values):
        problems.append(f"unsat, but {envs[values.index(True)]} satisfies it")
    script = smt.to_smt(e, TYPES)
    for want in (True, False):
        if want in values:
            env = envs[values.index(want)]
            got = smt.run_script(smt.pinned(script, env, TYPES), solver).status
            if got != ("sat" if want else "unsat"):
                problems.append(f"pinned {env}: evaluator says {want}, solver says {got}")
    return problems


def run_differential(count, seed=0, solver=None):
    failures = []
    for k in range(count):
        rng = random.Random(seed * 100_003 + k)
        e = random_formula(rng)
        probs = differential(e, rng, solver)
        if probs:
            failures.append((k, probs))
    return failures
