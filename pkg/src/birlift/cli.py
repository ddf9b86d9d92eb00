"""``birlift`` command-line interface.

Exit codes (stable):

====  ==========================================================
0     success
1     the contract (or a proof goal) does not hold, or is unknown
2     lifting or translation validation failed
3     typing errors
4     structural problems: loops, computed jumps, missing labels,
      malformed input files
5     environment problems: no solver, unreadable files
====  ==========================================================

Every command can write a JSON report (``--report FILE``, or ``--json`` for
stdout).  Reports carry ``"schema": "birlift.report/1"`` and contain no
timestamps or timings, so equal inputs and seeds give byte-identical
reports.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from . import cosim, smt
from .core import eval_expr, free_vars, has_subst, type_of_expr
from .lifter import SIM_TYPES, LiftedProgram, LiftError, lift_program, words_from_bytes
from .sem import DEFAULT_FUEL, BirState, weak_exec, weak_exec_step
from .sexpr import (
    ParseError,
    parse_env,
    parse_goal,
    parse_label,
    parse_predmaps,
    parse_program,
    print_env,
    print_expr,
    print_label,
    print_predmap,
    print_program,
    print_type,
)
from .simplify import SimplifyError, TautologyGoal, simplify_with_types, size_stats
from .syntax import (
    DIVERGED,
    TRUE,
    TRUE_E,
    TYPE_ERROR,
    BinOp,
    BinOpKind,
    BType,
    Const,
    Memory,
    Outcome,
    Program,
    Var,
    Word,
    label_key,
)
from .typecheck import ProgramTypeError, check_program, diagnose_program
from .wp import CycleError, WpError, build_cfg, wp_fragment

SCHEMA = "birlift.report/1"

OK, CONTRACT_FAILS, LIFT_FAILS, TYPING_FAILS, STRUCTURAL, ENVIRONMENT = range(6)


class CliError(Exception):
    def __init__(self, code: int, message: str, **extra) -> None:
        super().__init__(message)
        self.code = code
        self.extra = extra


@dataclass
class Workspace:
    """Input and output locations plus the global knobs shared by commands."""

    fuel: int = DEFAULT_FUEL
    trials: int = 1000
    seed: int = 0
    solver: str | None = None
    timeout: float = 60.0
    report: Path | None = None
    json_stdout: bool = False
    inputs: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args) -> "Workspace":
        return cls(
            fuel=getattr(args, "fuel", DEFAULT_FUEL),
            trials=getattr(args, "trials", 1000),
            seed=getattr(args, "seed", 0),
            solver=getattr(args, "solver", None),
            timeout=getattr(args, "timeout", 60.0),
            report=Path(args.report) if getattr(args, "report", None) else None,
            json_stdout=getattr(args, "json", False),
        )


def _hex(lab):
    return f"{lab:#x}" if isinstance(lab, int) else lab


# --------------------------------------------------------------------------
# Input helpers


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(ENVIRONMENT, f"cannot read {path}: {exc}") from exc


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _load_program(path) -> tuple[Program, dict]:
    try:
        pt = parse_program(_read(path))
    except ParseError as exc:
        raise CliError(STRUCTURAL, f"{path}: {exc}") from exc
    return pt.program, pt.declared


def _lift_from_args(args) -> LiftedProgram:
    """Lift ``--bin`` (with ``--base``) or re-lift the words recorded in ``--meta``."""
    if getattr(args, "meta", None):
        try:
            meta = json.loads(_read(args.meta))
            words = [(int(a, 16), int(w, 16)) for a, w in meta["source"]]
            entry = int(meta["entry"], 16) if meta.get("entry") else None
        except (ValueError, KeyError, TypeError) as exc:
            raise CliError(STRUCTURAL, f"{args.meta}: malformed metadata ({exc})") from exc
    elif getattr(args, "bin", None):
        try:
            data = Path(args.bin).read_bytes()
        except OSError as exc:
            raise CliError(ENVIRONMENT, f"cannot read {args.bin}: {exc}") from exc
        try:
            words = words_from_bytes(data, args.base)
        except LiftError as exc:
            raise CliError(LIFT_FAILS, str(exc)) from exc
        entry = args.entry
    else:
        raise CliError(STRUCTURAL, "need --bin FILE (with --base) or --meta FILE")
    try:
        return lift_program(words, entry)
    except LiftError as exc:
        raise CliError(LIFT_FAILS, str(exc)) from exc


def _typing_for(names, declared: dict) -> dict[str, BType]:
    out = {}
    for n in names:
        if n in declared:
            out[n] = declared[n]
        elif n in SIM_TYPES:
            out[n] = SIM_TYPES[n]
    return out


# --------------------------------------------------------------------------
# Reports


def _emit(ws: Workspace, report: dict, text_lines: list[str]) -> None:
    body = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if ws.report is not None:
        ws.report.write_text(body)
    if ws.json_stdout:
        sys.stdout.write(body)
    else:
        for line in text_lines:
            print(line)


def _report(command: str, code: int, **sections) -> dict:
    status = {OK: "ok", CONTRACT_FAILS: "contract_fails", LIFT_FAILS: "lift_or_validation_fails",
              TYPING_FAILS: "typing_fails", STRUCTURAL: "structural_error",
              ENVIRONMENT: "environment_error"}[code]
    return {"schema": SCHEMA, "command": command, "status": status, "exit_code": code, **sections}


# --------------------------------------------------------------------------
# Commands


def cmd_lift(args, ws: Workspace) -> int:
    lp = _lift_from_args(args)
    out = Path(args.out) if args.out else None
    text = print_program(lp.program, lp.declared)
    meta = lp.metadata()
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
        meta_path = Path(args.meta_out) if args.meta_out else out.with_suffix(out.suffix + ".meta.json")
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    code = LIFT_FAILS if (args.strict and lp.unsupported) else OK
    rep = _report("lift", code, metadata=meta, blocks=len(lp.program.blocks))
    lines = [f"lifted {len(lp.source)} instructions into {len(lp.program.blocks)} blocks"]
    if lp.unsupported:
        lines.append("unsupported: " + ", ".join(f"{a:#x}" for a in lp.unsupported))
    # stdout may already hold the program text, so the summary goes to stderr
    for line in lines:
        print(line, file=sys.stderr)
    if ws.report:
        ws.report.write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    if ws.json_stdout and out is not None:
        sys.stdout.write(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return code


def cmd_run(args, ws: Workspace) -> int:
    p, declared = _load_program(args.program)
    try:
        env = parse_env(_read(args.env)) if args.env else {}
        start = parse_label(args.start) if args.start else p.blocks[0].label
        ls = frozenset(parse_label(x) for x in args.labels)
    except ParseError as exc:
        raise CliError(STRUCTURAL, str(exc)) from exc
    res = weak_exec(p, BirState(env, start), ls, ws.fuel)
    if res is DIVERGED:
        outcome, final = "diverged", None
    elif isinstance(res.pc, Outcome):
        outcome, final = res.pc.name.lower(), res.env
    else:
        outcome, final = "reached", res.env
    rep = _report(
        "run", OK, outcome=outcome,
        pc=None if res is DIVERGED or isinstance(res.pc, Outcome) else _hex(res.pc),
        env=None if final is None else print_env(final),
    )
    lines = [f"outcome: {outcome}"]
    if rep["pc"] is not None:
        lines.append(f"pc: {rep['pc']}")
    if final is not None:
        lines.append(print_env(final).rstrip("\n"))
    _emit(ws, rep, lines)
    return OK


def cmd_typecheck(args, ws: Workspace) -> int:
    p, declared = _load_program(args.program)
    types, diags = diagnose_program(p, declared)
    code = TYPING_FAILS if diags else OK
    rep = _report(
        "typecheck", code,
        diagnostics=[d.to_dict() for d in diags],
        types={n: print_type(t) for n, t in sorted(types.items())},
    )
    lines = [str(d) for d in diags] or [f"ok: {len(types)} variables typed"]
    _emit(ws, rep, lines)
    return code


def cmd_cfg(args, ws: Workspace) -> int:
    p, _ = _load_program(args.program)
    cfg = build_cfg(p)
    graph = cfg.to_dict()
    cycle = cfg.find_cycle()
    graph["cycle"] = None if cycle is None else [_hex(x) for x in cycle]
    text = json.dumps(graph, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    rep = _report("cfg", OK, graph=graph)
    if ws.report:
        ws.report.write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    if not args.out:
        sys.stdout.write(text)
    return OK


def cmd_cosim(args, ws: Workspace) -> int:
    lp = _lift_from_args(args)
    rep_i = cosim.check_all_instructions(lp, ws.trials, ws.seed)
    parts = {"instructions": rep_i.to_dict()}
    ok = rep_i.passed
    if args.steps:
        rep_p = cosim.check_program(lp, args.steps, max(1, ws.trials // 10), ws.seed)
        parts["program"] = rep_p.to_dict()
        ok &= rep_p.passed
    if args.mutants:
        mutants = cosim.sample_mutants(lp, args.mutants, ws.seed)
        score = cosim.score_mutants(lp, mutants, ws.trials, ws.seed, ws.solver)
        parts["mutation"] = score.to_dict()
    code = OK if ok else LIFT_FAILS
    rep = _report("cosim", code, **parts)
    lines = [f"instruction trials: {rep_i.trials} per instruction, failures: {rep_i.failures}"]
    for cx in rep_i.all_counterexamples()[:3]:
        lines.append(f"  counterexample: {json.dumps(cx, sort_keys=True)}")
    if "program" in parts:
        lines.append(f"program lockstep: {'pass' if parts['program']['passed'] else 'FAIL'}")
    if "mutation" in parts:
        m = parts["mutation"]
        lines.append(
            f"mutants killed: {m['killed']}/{m['mutants']} (raw {m['raw_rate']:.0%}, "
            f"excluding {m['proved_equivalent']} proved equivalent: {m['adjusted_rate']:.0%})"
        )
    lines.append(cosim.BOUNDED_NOTE)
    _emit(ws, rep, lines)
    return code


def _contract(path, heads=("pre", "post")):
    try:
        return parse_predmaps(_read(path), heads)
    except ParseError as exc:
        raise CliError(STRUCTURAL, f"{path}: {exc}") from exc


def cmd_wp(args, ws: Workspace) -> int:
    p, _ = _load_program(args.program)
    maps, _ = _contract(args.post, ("post", "pred"))
    post = {**maps["pred"], **maps["post"]}
    try:
        targets = [parse_label(t) for t in args.targets] if args.targets else None
    except ParseError as exc:
        raise CliError(STRUCTURAL, str(exc)) from exc
    try:
        pre = wp_fragment(p, post, targets)
    except WpError as exc:
        raise CliError(STRUCTURAL, str(exc)) from exc
    wanted = targets if targets is not None else build_cfg(p).entries
    pre = {lab: pre[lab] for lab in wanted}
    text = print_predmap(pre, "pre")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if ws.report:
        stats = {_hex(k): size_stats(v).to_dict() for k, v in pre.items()}
        ws.report.write_text(json.dumps(_report("wp", OK, sizes=stats), indent=2, sort_keys=True) + "\n")
    return OK


def cmd_simplify(args, ws: Workspace) -> int:
    try:
        premise, conclusion, declared = parse_goal(_read(args.goal))
    except ParseError as exc:
        raise CliError(STRUCTURAL, f"{args.goal}: {exc}") from exc
    typing = _typing_for(free_vars(premise) | free_vars(conclusion), declared)
    try:
        res = simplify_with_types(TautologyGoal(premise, conclusion), typing or None)
    except SimplifyError as exc:
        raise CliError(TYPING_FAILS, str(exc)) from exc
    decls = {**declared, **res.fresh_types}
    text = "".join(f"(declare {n} {print_type(t)})\n" for n, t in sorted(decls.items()))
    text += f"(goal {print_expr(premise)} {print_expr(res.conclusion)})\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    before, after = size_stats(conclusion), size_stats(res.conclusion)
    sizes = {"before": before.to_dict(), "after": after.to_dict(), "fresh": [a.name for a in res.fresh]}
    if args.stats:
        for k in ("before", "after"):
            d = sizes[k]
            print(f"{k}: {d['tree_nodes']} tree nodes, {d['dag_nodes']} dag nodes, "
                  f"{d['subst_nodes']} substitutions", file=sys.stderr)
    if ws.report:
        ws.report.write_text(json.dumps(_report("simplify", OK, sizes=sizes), indent=2, sort_keys=True) + "\n")
    return OK


def _render_model(model: dict | None) -> dict | None:
    if model is None:
        return None
    out = {}
    for k in sorted(model):
        v = model[k]
        if isinstance(v, (Word, Memory)):
            out[k] = print_env({k: v}).strip()[len(k) + 2 : -1]
        else:
            out[k] = str(v)
    return out


def _prove(premise, conclusion, typing, ws: Workspace) -> dict:
    try:
        res = smt.prove_implication(premise, conclusion, typing, ws.solver, ws.timeout)
    except smt.SolverNotFound as exc:
        raise CliError(ENVIRONMENT, str(exc)) from exc
    except smt.SolverOutputError as exc:
        raise CliError(ENVIRONMENT, f"solver output not understood: {exc}") from exc
    except smt.SmtError as exc:
        raise CliError(STRUCTURAL, str(exc)) from exc
    return {"result": res.status, "model": _render_model(res.model)}


def cmd_prove(args, ws: Workspace) -> int:
    try:
        premise, conclusion, declared = parse_goal(_read(args.goal))
    except ParseError as exc:
        raise CliError(STRUCTURAL, f"{args.goal}: {exc}") from exc
    if has_subst(premise) or has_subst(conclusion):
        raise CliError(STRUCTURAL, "goal contains explicit substitutions; simplify first")
    typing = _typing_for(free_vars(premise) | free_vars(conclusion), declared)
    for part in (premise, conclusion):
        if type_of_expr(part, typing) is TYPE_ERROR:
            raise CliError(TYPING_FAILS, "goal is ill-typed (declare every variable)")
    proof = _prove(premise, conclusion, typing, ws)
    code = OK if proof["result"] == "proved" else CONTRACT_FAILS
    lines = [proof["result"]]
    for k, v in (proof["model"] or {}).items():
        lines.append(f"  {k} = {v}")
    _emit(ws, _report("prove", code, proof=proof), lines)
    return code


# --------------------------------------------------------------------------
# cfg-integrity


def _conjuncts(e):
    if type(e) is BinOp and e.op == BinOpKind.LAND:
        yield from _conjuncts(e.left)
        yield from _conjuncts(e.right)
    else:
        yield e


def _pinned(pre) -> dict:
    """Variables the precondition fixes outright through ``(eq VAR CONST)`` conjuncts."""
    out = {}
    for cj in _conjuncts(pre):
        if type(cj) is BinOp and cj.op == BinOpKind.EQ:
            a, b = cj.left, cj.right
            if type(a) is Const and type(b) is Var:
                a, b = b, a
            if type(a) is Var and type(b) is Const:
                out[a.name] = Word(b.width, b.bits)
    return out


def _constants(e, acc: set) -> set:
    if type(e) is Const:
        acc.add(e.bits)
    for ch in e.children():
        _constants(ch, acc)
    return acc


def _random_value(rng: random.Random, t: BType, hints: list[int]):
    if t.kind == "mem":
        data = {rng.getrandbits(t.width): rng.randrange(1, 256) for _ in range(rng.randrange(4))}
        return Memory(t.width, data)
    r = rng.random()
    if hints and r < 0.4:
        v = rng.choice(hints) + rng.choice((0, 0, 1, -1, 16, -16))
    elif r < 0.6:
        v = rng.randrange(64)
    else:
        v = rng.getrandbits(t.width)
    return Word(t.width, v % (1 << t.width))


def cmd_cfg_integrity(args, ws: Workspace) -> int:
    if args.program:
        p, declared = _load_program(args.program)
        try:
            types = check_program(p, declared).types
        except ProgramTypeError as exc:
            raise CliError(TYPING_FAILS, str(exc)) from exc
        ints = [b.label for b in p.blocks if isinstance(b.label, int)]
        ls = frozenset(ints or p.labels)
    else:
        lp = _lift_from_args(args)
        p = lp.program
        types = dict(SIM_TYPES)
        ls = lp.entry_labels
    try:
        edges_raw = json.loads(_read(args.graph))
        edges_raw = edges_raw.get("edges", edges_raw) if isinstance(edges_raw, dict) else edges_raw
        graph = {(parse_label(str(a)), parse_label(str(b))) for a, b in edges_raw}
    except (ValueError, TypeError, ParseError) as exc:
        raise CliError(STRUCTURAL, f"{args.graph}: malformed edge list ({exc})") from exc
    # leaving the fragment through an allowed edge ends the trace instead of failing
    ls = ls | {b for _, b in graph if b not in p.index} | set(build_cfg(p).exits)
    maps, pre_decl = _contract(args.pre, ("pre", "pred"))
    pre = {**maps["pred"], **maps["pre"]}
    if not pre:
        raise CliError(STRUCTURAL, f"{args.pre}: no precondition items")
    types.update(pre_decl)
    entries = [parse_label(e) for e in args.entries] if args.entries else sorted(pre, key=label_key)
    names = sorted(types)

    observed: set = set()
    violation = None
    checked = rejected = diverged = 0
    for idx in range(ws.trials):
        rng = random.Random(f"{ws.seed}:{idx}")
        entry = entries[idx % len(entries)]
        cond = pre.get(entry, TRUE_E)
        pinned = _pinned(cond)
        hints = sorted(_constants(cond, set()))
        env = None
        for _ in range(64):
            cand = {n: pinned.get(n) or _random_value(rng, types[n], hints) for n in names}
            if eval_expr(cond, cand) == TRUE:
                env = cand
                break
        if env is None:
            rejected += 1
            continue
        checked += 1
        bs = BirState(env, entry)
        trace = deque([_hex(entry)], maxlen=64)  # the tail is enough to locate a violation
        for _ in range(ws.fuel):
            nxt = weak_exec_step(p, bs, ls, ws.fuel)
            if nxt is DIVERGED:
                # only allowed edges were taken; running out of fuel is not a violation
                diverged += 1
                break
            if nxt.is_error:
                violation = {"kind": "error_state", "outcome": nxt.pc.name.lower(), "trace": list(trace),
                             "env": print_env(env)}
                break
            edge = (bs.pc, nxt.pc)
            observed.add(edge)
            trace.append(_hex(nxt.pc))
            if edge not in graph:
                violation = {"kind": "edge", "edge": [_hex(bs.pc), _hex(nxt.pc)], "trace": list(trace),
                             "env": print_env(env)}
                break
            if nxt.pc not in p.index:
                break
            bs = nxt
        else:
            diverged += 1
        if violation:
            break
    code = CONTRACT_FAILS if violation else OK
    if checked == 0 and not violation:
        code = CONTRACT_FAILS
        violation = {"kind": "no_states", "message": "could not sample a state satisfying the precondition"}
    rep = _report(
        "cfg-integrity", code,
        trials=checked, rejected=rejected, diverged=diverged,
        observed_edges=sorted([[_hex(a), _hex(b)] for a, b in observed], key=str),
        violation=violation,
        note="testing-grade: edges were observed on sampled runs, not proved",
    )
    lines = [f"{checked} traces, {len(observed)} distinct edges observed"]
    if violation:
        lines.append(f"violation: {json.dumps(violation, sort_keys=True)}")
    else:
        lines.append("all observed edges are in the graph; no error states")
    _emit(ws, rep, lines)
    return code


# --------------------------------------------------------------------------
# verify


def cmd_verify(args, ws: Workspace) -> int:
    stages: dict = {}
    conditions: dict = {}

    def finish(code: int, lines: list[str]) -> int:
        rep = _report("verify", code, stages=stages, conditions=conditions)
        _emit(ws, rep, lines)
        return code

    # 1. lift
    lp = _lift_from_args(args)
    stages["lift"] = {"instructions": len(lp.source), "blocks": len(lp.program.blocks),
                      "memr": lp.memr.to_json(), "unsupported": [f"{a:#x}" for a in lp.unsupported]}
    if lp.unsupported:
        return finish(LIFT_FAILS, ["unsupported instructions at " + ", ".join(stages["lift"]["unsupported"])])

    # 2. translation validation
    rep_c = cosim.check_all_instructions(lp, ws.trials, ws.seed)
    stages["cosim"] = {"passed": rep_c.passed, "trials": rep_c.trials, "counts": dict(sorted(rep_c.total_counts().items())),
                       "counterexamples": rep_c.all_counterexamples()[:3]}
    conditions["lifter_simulation"] = {
        "discharged_by": "cosim", "status": "tested" if rep_c.passed else "failed",
        "note": "bounded testing evidence for the simulation between machine and lifted code",
    }
    if not rep_c.passed:
        return finish(LIFT_FAILS, ["translation validation failed"])

    # 3. typing
    try:
        ctx = check_program(lp.program, lp.declared)
    except ProgramTypeError as exc:
        stages["typecheck"] = {"diagnostics": [d.to_dict() for d in exc.diagnostics]}
        return finish(TYPING_FAILS, [str(exc)])
    stages["typecheck"] = {"variables": len(ctx.types)}

    # 4. contract, cfg and wp
    maps, decl = _contract(args.contract)
    pre_map, post_map = maps["pre"], maps["post"]
    if not pre_map or not post_map:
        raise CliError(STRUCTURAL, "contract needs at least one pre and one post item")
    cfg = build_cfg(lp.program)
    known = set(cfg.nodes)
    for lab in list(pre_map) + list(post_map):
        if lab not in known:
            raise CliError(STRUCTURAL, f"contract label {print_label(lab)} is not in the lifted program's graph")
    stages["cfg"] = {"nodes": len(cfg.nodes), "edges": len(cfg.edges), "exits": [_hex(x) for x in cfg.exits],
                     "unresolved": [_hex(x) for x in cfg.unresolved]}
    conditions["bir_control_flow_integrity"] = {
        "discharged_by": "cfg",
        "status": "static" if not cfg.unresolved else "needs cfg-integrity",
        "note": "all jump targets constant" if not cfg.unresolved else "computed jumps present",
    }
    typing = {**ctx.types, **decl}
    targets = sorted(pre_map, key=label_key)
    try:
        h = wp_fragment(lp.program, post_map, targets)
        h_true = wp_fragment(lp.program, {lab: TRUE_E for lab in post_map}, targets)
    except CycleError as exc:
        stages["wp"] = {"error": str(exc), "cycle": [_hex(x) for x in exc.cycle]}
        return finish(STRUCTURAL, [str(exc)])
    except WpError as exc:
        stages["wp"] = {"error": str(exc)}
        return finish(STRUCTURAL, [str(exc)])
    stages["wp"] = {_hex(lab): size_stats(h[lab]).to_dict() for lab in targets}

    # 5. simplify and prove, once for the contract and once for error freedom
    proofs = {}
    for key, hmap in (("contract", h), ("error_freedom", h_true)):
        results = {}
        for lab in targets:
            res = simplify_with_types(TautologyGoal(pre_map[lab], hmap[lab]), typing)
            ty = {**typing, **res.fresh_types}
            proof = _prove(pre_map[lab], res.conclusion, ty, ws)
            if proof["model"] is not None:
                # fresh abbreviation variables only restate intermediate values
                fresh = {a.name for a in res.fresh}
                proof["model"] = {k: v for k, v in proof["model"].items() if k not in fresh}
            proof["simplified"] = size_stats(res.conclusion).to_dict()
            proof["fresh"] = len(res.fresh)
            results[_hex(lab)] = proof
        proofs[key] = results
    stages["prove"] = proofs
    ok_contract = all(r["result"] == "proved" for r in proofs["contract"].values())
    ok_errors = all(r["result"] == "proved" for r in proofs["error_freedom"].values())
    conditions["contract"] = {"discharged_by": "wp+simplify+prove", "status": "proved" if ok_contract else "not proved"}
    conditions["error_freedom"] = {
        "discharged_by": "wp with every postcondition true",
        "status": "proved" if ok_errors else "not proved",
        "note": "establishing postcondition true rules out failing asserts, including writes into memr",
    }
    conditions["transfer_to_machine"] = {
        "status": "manual",
        "note": "machine-level reading of the contract follows from the simulation relation; not machine-checked",
    }
    code = OK if ok_contract and ok_errors else CONTRACT_FAILS
    lines = [f"lifted {len(lp.source)} instructions; cosim {rep_c.trials} trials passed"]
    for key, results in proofs.items():
        for lab, r in results.items():
            lines.append(f"{key} at {lab}: {r['result']}")
            for k, v in (r["model"] or {}).items():
                lines.append(f"  {k} = {v}")
    return finish(code, lines)


# --------------------------------------------------------------------------
# Argument parsing


def _add_common(sp: argparse.ArgumentParser, *, seed=False, trials=False, solver=False, fuel=False) -> None:
    sp.add_argument("--report", metavar="FILE", help="write the JSON report here")
    sp.add_argument("--json", action="store_true", help="print the JSON report instead of text")
    if seed:
        sp.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    if trials:
        sp.add_argument("--trials", type=int, default=1000, help="randomized trials (default 1000)")
    if solver:
        sp.add_argument("--solver", metavar="PATH", help=f"SMT solver executable (default ${smt.SOLVER_ENV} or z3)")
        sp.add_argument("--timeout", type=float, default=60.0, metavar="SECONDS", help="per-query timeout")
    if fuel:
        sp.add_argument("--fuel", type=int, default=DEFAULT_FUEL, help="maximum blocks per run (default 1000000)")


def _add_binary(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--bin", metavar="FILE", help="flat little-endian instruction words")
    sp.add_argument("--base", type=_int, default=0, help="load address of --bin")
    sp.add_argument("--entry", type=_int, help="entry address (default: base)")
    sp.add_argument("--meta", metavar="FILE", help="metadata sidecar written by 'lift' (instead of --bin)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="birlift", description="Lift AArch64 code to BIR, validate, and verify contracts.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("lift", help="lift a binary to BIR text plus a metadata sidecar")
    _add_binary(sp)
    sp.add_argument("-o", "--out", metavar="FILE", help="BIR output (default stdout)")
    sp.add_argument("--meta-out", metavar="FILE", help="sidecar path (default OUT.meta.json)")
    sp.add_argument("--strict", action="store_true", help="exit 2 if any instruction is unsupported")
    _add_common(sp)
    sp.set_defaults(func=cmd_lift)

    sp = sub.add_parser("run", help="run a BIR program from an initial environment")
    sp.add_argument("program")
    sp.add_argument("--env", metavar="FILE", help="initial environment, (NAME VALUE) items")
    sp.add_argument("--start", metavar="LABEL", help="start label (default: first block)")
    sp.add_argument("--labels", nargs="*", default=[], metavar="LABEL", help="stop when reaching one of these")
    _add_common(sp, fuel=True)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("typecheck", help="type-check a BIR program")
    sp.add_argument("program")
    _add_common(sp)
    sp.set_defaults(func=cmd_typecheck)

    sp = sub.add_parser("cfg", help="print the control-flow graph as JSON")
    sp.add_argument("program")
    sp.add_argument("-o", "--out", metavar="FILE")
    _add_common(sp)
    sp.set_defaults(func=cmd_cfg)

    sp = sub.add_parser("cfg-integrity", help="test that sampled runs only take allowed edges")
    sp.add_argument("--program", metavar="FILE", help="BIR program (instead of --bin)")
    _add_binary(sp)
    sp.add_argument("--graph", required=True, metavar="FILE", help="JSON edge list or 'cfg' output")
    sp.add_argument("--pre", required=True, metavar="FILE", help="precondition map, (pre LABEL EXPR) items")
    sp.add_argument("--entries", nargs="*", metavar="LABEL", help="start labels (default: labels of --pre)")
    _add_common(sp, seed=True, trials=True, fuel=True)
    sp.set_defaults(func=cmd_cfg_integrity)

    sp = sub.add_parser("cosim", help="validate lifted instructions against the machine model")
    _add_binary(sp)
    sp.add_argument("--steps", type=int, default=0, help="also run whole-program lockstep for this many steps")
    sp.add_argument("--mutants", type=int, default=0, help="also score this many injected lifter mutants")
    _add_common(sp, seed=True, trials=True, solver=True)
    sp.set_defaults(func=cmd_cosim)

    sp = sub.add_parser("wp", help="weakest preconditions for a loop-free program")
    sp.add_argument("program")
    sp.add_argument("--post", required=True, metavar="FILE", help="postcondition map, (post LABEL EXPR) items")
    sp.add_argument("--targets", nargs="*", metavar="LABEL", help="labels to compute (default: entries)")
    sp.add_argument("-o", "--out", metavar="FILE", help="pre-map output (default stdout)")
    _add_common(sp)
    sp.set_defaults(func=cmd_wp)

    sp = sub.add_parser("simplify", help="remove explicit substitutions from a goal")
    sp.add_argument("goal")
    sp.add_argument("-o", "--out", metavar="FILE")
    sp.add_argument("--stats", action="store_true", help="print node counts before and after")
    _add_common(sp)
    sp.set_defaults(func=cmd_simplify)

    sp = sub.add_parser("prove", help="prove a substitution-free goal with an SMT solver")
    sp.add_argument("goal")
    _add_common(sp, solver=True)
    sp.set_defaults(func=cmd_prove)

    sp = sub.add_parser("verify", help="lift, validate, type-check, compute wp and prove a contract")
    _add_binary(sp)
    sp.add_argument("--contract", required=True, metavar="FILE", help="(pre LABEL EXPR) and (post LABEL EXPR) items")
    _add_common(sp, seed=True, trials=True, solver=True)
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    ws = Workspace.from_args(args)
    try:
        return args.func(args, ws)
    except CliError as exc:
        rep = _report(args.command, exc.code, error=str(exc), **exc.extra)
        if ws.report is not None:
            ws.report.write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
        if ws.json_stdout:
            sys.stdout.write(json.dumps(rep, indent=2, sort_keys=True) + "\n")
        print(f"birlift {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
