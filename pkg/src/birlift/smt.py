"""SMT-LIB2 export of BIR predicates and an external-solver front end.

Encoding (logic ``QF_ABV``): ``Reg n`` is ``(_ BitVec n)``, booleans are
1-bit vectors with ``#b1`` as truth, ``Mem a`` is an array from
``(_ BitVec a)`` to ``(_ BitVec 8)``.  Loads and stores are little-endian
byte sequences; shift amounts are reduced modulo the width as in BIR.
Shared subterms are emitted once with ``define-fun``.

The export is untrusted: its faithfulness is checked by differential tests
against brute-force evaluation, not proved.
"""

from __future__ import annotations

import os
import re
import shutil
import subprocess
from collections.abc import Mapping
from dataclasses import dataclass, field

from .core import free_vars, type_of_expr
from .syntax import (
    TYPE_ERROR,
    BinOp,
    BinOpKind,
    BType,
    Const,
    Expr,
    Ite,
    LabelConst,
    Load,
    Memory,
    Reg,
    Store,
    Subst,
    UnOp,
    UnOpKind,
    Var,
    Word,
    implies,
    land,
    lnot,
)

SOLVER_ENV = "BIRLIFT_SOLVER"
LOGIC = "QF_ABV"


class SmtError(Exception):
    pass


class SolverNotFound(SmtError):
    pass


class SolverOutputError(SmtError):
    pass


# --------------------------------------------------------------------------
# Encoding

_SIMPLE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")
_RESERVED = {"and", "or", "not", "ite", "let", "true", "false", "select", "store", "concat", "_", "as"}


def smt_name(name: str) -> str:
    if _SIMPLE.match(name) and name not in _RESERVED and not name.startswith("_t"):
        return name
    if "|" in name or "\\" in name:
        raise SmtError(f"variable name {name!r} cannot be quoted in SMT-LIB")
    return f"|{name}|"


def sort_of(t: BType) -> str:
    if t.kind == "reg":
        return f"(_ BitVec {t.width})"
    if t.kind == "mem":
        return f"(Array (_ BitVec {t.width}) (_ BitVec 8))"
    raise SmtError(f"type {t!r} has no SMT sort")


def _bv(width: int, value: int) -> str:
    return f"(_ bv{value} {width})"


_BIN = {
    BinOpKind.ADD: "bvadd",
    BinOpKind.SUB: "bvsub",
    BinOpKind.MUL: "bvmul",
    BinOpKind.AND: "bvand",
    BinOpKind.OR: "bvor",
    BinOpKind.XOR: "bvxor",
    BinOpKind.LAND: "bvand",
    BinOpKind.LOR: "bvor",
}
_SHIFT = {BinOpKind.SHL: "bvshl", BinOpKind.LSHR: "bvlshr", BinOpKind.ASHR: "bvashr"}
_CMP = {BinOpKind.ULT: "bvult", BinOpKind.SLT: "bvslt"}


@dataclass
class SmtScript:
    declarations: list[tuple[str, str]]  # (smt name, sort), sorted by name
    definitions: list[tuple[str, str, str]]  # (name, sort, term)
    assertion: str
    get_values: list[str] = field(default_factory=list)
    logic: str = LOGIC

    def text(self) -> str:
        lines = [f"(set-logic {self.logic})", "(set-option :produce-models true)"]
        lines += [f"(declare-fun {n} () {s})" for n, s in self.declarations]
        lines += [f"(define-fun {n} () {s} {t})" for n, s, t in self.definitions]
        lines.append(f"(assert {self.assertion})")
        lines.append("(check-sat)")
        if self.get_values:
            lines.append(f"(get-value ({' '.join(self.get_values)}))")
        lines.append("(exit)")
        return "\n".join(lines) + "\n"


class _Encoder:
    def __init__(self, typing: Mapping[str, BType]) -> None:
        self.typing = typing
        self.names: dict[int, str] = {}
        self.defs: list[tuple[str, str, str]] = []
        self.refs: dict[int, int] = {}
        self.types: dict[int, BType] = {}

    def count(self, root: Expr) -> None:
        stack = [root]
        while stack:
            x = stack.pop()
            k = id(x)
            self.refs[k] = self.refs.get(k, 0) + 1
            if self.refs[k] == 1:
                stack.extend(x.children())

    def type_of(self, e: Expr) -> BType:
        t = self.types.get(id(e))
        if t is None:
            t = type_of_expr(e, self.typing)
            if t is TYPE_ERROR:
                raise SmtError(f"ill-typed expression {e}")
            self.types[id(e)] = t
        return t

    def term(self, e: Expr) -> str:
        k = id(e)
        name = self.names.get(k)
        if name is not None:
            return name
        text = self.build(e)
        if self.refs.get(k, 0) > 1 and type(e) not in (Var, Const):
            name = f"_t{len(self.defs)}"
            self.defs.append((name, sort_of(self.type_of(e)), text))
            self.names[k] = name
            return name
        return text

    def build(self, e: Expr) -> str:
        t = type(e)
        if t is Const:
            return _bv(e.width, e.bits)
        if t is Var:
            if e.name not in self.typing:
                raise SmtError(f"no type for variable {e.name}")
            return smt_name(e.name)
        if t is LabelConst:
            raise SmtError("label constants have no SMT encoding")
        if t is Subst:
            raise SmtError("explicit substitution in SMT export; simplify first")
        if t is Ite:
            return f"(ite (= {self.term(e.cond)} #b1) {self.term(e.then)} {self.term(e.else_)})"
        if t is UnOp:
            a = self.term(e.arg)
            w = self.type_of(e.arg).width
            if e.op == UnOpKind.NOT:
                return f"(bvnot {a})"
            if e.op == UnOpKind.NEG:
                return f"(bvneg {a})"
            if e.op == UnOpKind.TRUNC:
                return a if e.width == w else f"((_ extract {e.width - 1} 0) {a})"
            kind = "zero_extend" if e.op == UnOpKind.ZEXT else "sign_extend"
            return a if e.width == w else f"((_ {kind} {e.width - w}) {a})"
        if t is BinOp:
            a, b = self.term(e.left), self.term(e.right)
            op = e.op
            if op in _BIN:
                return f"({_BIN[op]} {a} {b})"
            if op == BinOpKind.IMPLIES:
                return f"(bvor (bvnot {a}) {b})"
            if op in _SHIFT:
                w = self.type_of(e.left).width
                return f"({_SHIFT[op]} {a} (bvurem {b} {_bv(w, w)}))"
            if op == BinOpKind.EQ:
                return f"(ite (= {a} {b}) #b1 #b0)"
            if op in _CMP:
                return f"(ite ({_CMP[op]} {a} {b}) #b1 #b0)"
        if t is Load:
            m, addr = self.term(e.mem), self.term(e.addr)
            aw = self.type_of(e.mem).width
            parts = [f"(select {m} {_offset(addr, i, aw)})" for i in range(e.width // 8)]
            return parts[0] if len(parts) == 1 else f"(concat {' '.join(reversed(parts))})"
        if t is Store:
            m, addr, v = self.term(e.mem), self.term(e.addr), self.term(e.value)
            aw = self.type_of(e.mem).width
            out = m
            for i in range(e.width // 8):
                byte = v if e.width == 8 else f"((_ extract {8 * i + 7} {8 * i}) {v})"
                out = f"(store {out} {_offset(addr, i, aw)} {byte})"
            return out
        raise SmtError(f"cannot encode {e!r}")


def _offset(addr: str, i: int, aw: int) -> str:
    return addr if i == 0 else f"(bvadd {addr} {_bv(aw, i)})"


def to_smt(e: Expr, typing: Mapping[str, BType]) -> SmtScript:
    """Script asserting that the Reg1 expression ``e`` is true."""
    if type_of_expr(e, typing) is not Reg(1):
        raise SmtError("only Reg1 expressions can be asserted")
    enc = _Encoder(typing)
    enc.count(e)
    term = enc.term(e)
    names = sorted(free_vars(e))
    decls = [(smt_name(n), sort_of(typing[n])) for n in names]
    return SmtScript(decls, enc.defs, f"(= {term} #b1)", [smt_name(n) for n in names])


def value_term(v, t: BType) -> str:
    """SMT literal for a concrete BIR value; memories become stores over a zero array."""
    if t.kind == "reg":
        return _bv(t.width, v.bits)
    out = f"((as const {sort_of(t)}) {_bv(8, 0)})"
    for a, b in sorted(v.data.items()):
        out = f"(store {out} {_bv(t.width, a)} {_bv(8, b)})"
    return out


def pinned(script: SmtScript, env: Mapping[str, object], typing: Mapping[str, BType]) -> SmtScript:
    """``script`` with every declared variable fixed to its value in ``env``."""
    inverse = {smt_name(n): n for n in typing}
    pins = [f"(= {n} {value_term(env[inverse[n]], typing[inverse[n]])})" for n, _ in script.declarations]
    assertion = f"(and {script.assertion} {' '.join(pins)})" if pins else script.assertion
    return SmtScript(script.declarations, script.definitions, assertion, script.get_values, script.logic)


# --------------------------------------------------------------------------
# Running a solver


def find_solver(path: str | None = None) -> str:
    """Solver executable: explicit path, then ``$BIRLIFT_SOLVER``, then ``z3`` on PATH."""
    for cand in (path, os.environ.get(SOLVER_ENV)):
        if cand:
            found = shutil.which(cand) or (cand if os.path.isfile(cand) else None)
            if not found:
                raise SolverNotFound(f"solver {cand!r} not found")
            return found
    found = shutil.which("z3")
    if not found:
        raise SolverNotFound(f"no SMT solver: install z3 or set {SOLVER_ENV}")
    return found


def solver_available(path: str | None = None) -> bool:
    try:
        find_solver(path)
        return True
    except SolverNotFound:
        return False


def _command(solver: str) -> list[str]:
    base = os.path.basename(solver).lower()
    if "z3" in base:
        return [solver, "-in", "-smt2"]
    if "cvc" in base:
        return [solver, "--lang=smt2", "--produce-models"]
    return [solver]


@dataclass
class SatResult:
    status: str  # "sat" | "unsat" | "unknown"
    model: dict | None = None
    raw: str = ""


def run_script(script: SmtScript, solver: str | None = None, timeout: float | None = 30.0) -> SatResult:
    exe = find_solver(solver)
    try:
        proc = subprocess.run(
            _command(exe), input=script.text(), capture_output=True, text=True, timeout=timeout
        )
    except subprocess.TimeoutExpired:
        return SatResult("unknown", None, "timeout")
    except OSError as exc:
        raise SolverNotFound(f"cannot run solver {exe!r}: {exc}") from exc
    out = proc.stdout
    tokens = _parse_sexprs(out)
    if not tokens or tokens[0] not in ("sat", "unsat", "unknown"):
        raise SolverOutputError(f"unexpected solver output: {(out or proc.stderr)[:200]!r}")
    status = tokens[0]
    model = None
    if status == "sat" and not script.get_values:
        model = {}  # closed formula: nothing to ask for
    elif status == "sat":
        if len(tokens) < 2 or not isinstance(tokens[1], list):
            raise SolverOutputError("solver reported sat without a model")
        model = {}
        for pair in tokens[1]:
            if not (isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str)):
                raise SolverOutputError(f"malformed model entry {pair!r}")
            model[pair[0].strip("|")] = pair[1]
    return SatResult(status, model, out)


def decode_model(model: dict, typing: Mapping[str, BType]) -> dict:
    """Turn ``get-value`` output into BIR values where possible."""
    env = {}
    for name, val in model.items():
        t = typing.get(name)
        if t is None:
            continue
        if t.kind == "reg":
            env[name] = Word(t.width, _bv_value(val))
        else:
            env[name] = _array_value(val, t.width)
    return env


def _bv_value(v) -> int:
    if isinstance(v, str):
        if v.startswith("#b"):
            return int(v[2:], 2)
        if v.startswith("#x"):
            return int(v[2:], 16)
    if isinstance(v, list) and len(v) == 3 and v[0] == "_" and v[1].startswith("bv"):
        return int(v[1][2:])
    raise SolverOutputError(f"cannot read bit-vector value {v!r}")


def _array_value(v, aw: int):
    """Decode ``store`` chains over a constant array; other forms are kept as text."""
    data: dict[int, int] = {}
    default = 0
    stores: list[tuple[int, int]] = []
    cur = v
    while isinstance(cur, list) and cur and cur[0] == "store" and len(cur) == 4:
        stores.append((_bv_value(cur[2]), _bv_value(cur[3])))
        cur = cur[1]
    if isinstance(cur, list) and len(cur) == 2 and isinstance(cur[0], list) and cur[0][:2] == ["as", "const"]:
        default = _bv_value(cur[1])
    else:
        return _render(v)
    if default:
        return _render(v)
    for a, b in reversed(stores):
        data[a] = b
    return Memory(aw, data)


def _render(v) -> str:
    if isinstance(v, list):
        return "(" + " ".join(_render(x) for x in v) + ")"
    return v


def _parse_sexprs(text: str) -> list:
    toks = re.findall(r"\(|\)|\|[^|]*\||\"[^\"]*\"|[^\s()]+", text)
    out: list = []
    stack: list[list] = [out]
    for tok in toks:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise SolverOutputError("unbalanced parentheses in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise SolverOutputError("unbalanced parentheses in solver output")
    return out


def check_sat(e: Expr, typing: Mapping[str, BType], solver: str | None = None, timeout: float | None = 30.0) -> SatResult:
    res = run_script(to_smt(e, typing), solver, timeout)
    if res.model is not None:
        res.model = decode_model(res.model, typing)
    return res


@dataclass
class ProofResult:
    status: str  # "proved" | "counterexample" | "unknown"
    model: dict | None = None
    script: str = ""

    @property
    def proved(self) -> bool:
        return self.status == "proved"


def prove_implication(
    p: Expr,
    p2: Expr,
    typing: Mapping[str, BType],
    solver: str | None = None,
    timeout: float | None = 30.0,
) -> ProofResult:
    """Is ``p => p2`` valid?  Checks ``p and not p2`` for satisfiability."""
    goal = land(p, lnot(p2))
    script = to_smt(goal, typing)
    res = run_script(script, solver, timeout)
    if res.status == "unsat":
        return ProofResult("proved", None, script.text())
    if res.status == "sat":
        return ProofResult("counterexample", decode_model(res.model or {}, typing), script.text())
    return ProofResult("unknown", None, script.text())


def valid(e: Expr, typing: Mapping[str, BType], solver: str | None = None) -> bool:
    from .syntax import TRUE_E

    return prove_implication(TRUE_E, e, typing, solver).proved


__all__ = [
    "SmtError",
    "SolverNotFound",
    "SolverOutputError",
    "SmtScript",
    "to_smt",
    "pinned",
    "value_term",
    "find_solver",
    "solver_available",
    "run_script",
    "check_sat",
    "prove_implication",
    "ProofResult",
    "SatResult",
    "decode_model",
    "implies",
    "valid",
]
