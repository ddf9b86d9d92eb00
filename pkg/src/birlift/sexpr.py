"""Canonical S-expression text format for BIR expressions, programs, environments and predicate maps.

Grammar (``;`` starts a comment)::

    expr   := true | false | NAME
            | (const WIDTH VALUE) | (label "STRING")
            | (ite expr expr expr)
            | (not expr) | (neg expr)
            | (zext WIDTH expr) | (sext WIDTH expr) | (trunc WIDTH expr)
            | (BINOP expr expr)        ; add sub mul and or xor shl lshr ashr
                                       ; eq ult slt land lor implies
            | (load expr expr WIDTH) | (store expr expr expr WIDTH)
            | (subst expr NAME expr)
    type   := (reg WIDTH) | (mem ADDR_WIDTH) | label
    value  := true | false | (const WIDTH VALUE) | (label "STRING")
            | (mem ADDR_WIDTH (ADDR BYTE)*)
    label  := INTEGER | "STRING"
    stmt   := (assign NAME expr) | (assert expr)
    cf     := (jmp expr) | (cjmp expr expr expr)
    block  := (block label stmt* cf)

Program files hold ``(declare NAME type)`` and ``block`` items; environment
files hold ``(NAME value)`` items; predicate-map files hold ``(pred label
expr)`` items; contract files hold ``pre``/``post`` items shaped like
``pred``; goal files hold one ``(goal premise conclusion)`` item.  Integer
labels and constant values print in hex.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .syntax import (
    BINOP_NAMES,
    LABEL,
    UNOP_NAMES,
    Assert,
    Assign,
    BinOp,
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
    Var,
    Word,
)


class ParseError(ValueError):
    pass


class Sym(str):
    """A bare symbol token (as opposed to a string literal)."""


_TOKEN = re.compile(r'\s+|;[^\n]*|(\()|(\))|"((?:[^"\\]|\\.)*)"|([^\s()";]+)')


def read_all(text: str) -> list:
    """Parse every S-expression in ``text`` into nested lists of tokens."""
    stack: list[list] = [[]]
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        lp, rp, string, atom = m.groups()
        if lp:
            stack.append([])
        elif rp:
            if len(stack) == 1:
                raise ParseError(f"unbalanced ')' at offset {m.start()}")
            done = stack.pop()
            stack[-1].append(done)
        elif string is not None:
            stack[-1].append(bytes(string, "utf-8").decode("unicode_escape"))
        elif atom is not None:
            stack[-1].append(_atom(atom))
    if len(stack) != 1:
        raise ParseError("unbalanced '(' at end of input")
    return stack[0]


def _atom(tok: str):
    try:
        return int(tok, 0)
    except ValueError:
        return Sym(tok)


def _int(x, what: str) -> int:
    if isinstance(x, int) and not isinstance(x, bool):
        return x
    raise ParseError(f"expected integer for {what}, got {x!r}")


def _name(x, what: str = "name") -> str:
    if isinstance(x, Sym):
        return str(x)
    raise ParseError(f"expected symbol for {what}, got {x!r}")


_UNOPS = {v: k for k, v in UNOP_NAMES.items()}
_BINOPS = {v: k for k, v in BINOP_NAMES.items()}


def to_expr(sx) -> Expr:
    if isinstance(sx, Sym):
        if sx == "true":
            return Const(1, 1)
        if sx == "false":
            return Const(1, 0)
        return Var(str(sx))
    if not isinstance(sx, list) or not sx or not isinstance(sx[0], Sym):
        raise ParseError(f"not an expression: {sx!r}")
    head, args = sx[0], sx[1:]
    try:
        if head == "const":
            _arity(sx, 2)
            return Const.of(_int(args[0], "width"), _int(args[1], "value"))
        if head == "label":
            _arity(sx, 1)
            if not isinstance(args[0], str) or isinstance(args[0], Sym):
                raise ParseError("label literal needs a string")
            return LabelConst(args[0])
        if head == "ite":
            _arity(sx, 3)
            return Ite(to_expr(args[0]), to_expr(args[1]), to_expr(args[2]))
        if head in ("not", "neg"):
            _arity(sx, 1)
            return UnOp(_UNOPS[head], to_expr(args[0]))
        if head in ("zext", "sext", "trunc"):
            _arity(sx, 2)
            return UnOp(_UNOPS[head], to_expr(args[1]), _int(args[0], "width"))
        if head in _BINOPS:
            _arity(sx, 2)
            return BinOp(_BINOPS[head], to_expr(args[0]), to_expr(args[1]))
        if head == "load":
            _arity(sx, 3)
            return Load(to_expr(args[0]), to_expr(args[1]), _int(args[2], "width"))
        if head == "store":
            _arity(sx, 4)
            return Store(to_expr(args[0]), to_expr(args[1]), to_expr(args[2]), _int(args[3], "width"))
        if head == "subst":
            _arity(sx, 3)
            return Subst(to_expr(args[0]), _name(args[1]), to_expr(args[2]))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{exc} in {head}") from exc
    raise ParseError(f"unknown operator {head!r}")


def _arity(sx: list, n: int) -> None:
    if len(sx) != n + 1:
        raise ParseError(f"{sx[0]} expects {n} operands, got {len(sx) - 1}")


def parse_expr(text: str) -> Expr:
    items = read_all(text)
    if len(items) != 1:
        raise ParseError(f"expected one expression, found {len(items)}")
    return to_expr(items[0])


def print_expr(e: Expr) -> str:
    out: list[str] = []
    _emit(e, out)
    return "".join(out)


def _emit(e: Expr, out: list[str]) -> None:
    t = type(e)
    if t is Var:
        out.append(e.name)
    elif t is Const:
        if e.width == 1:
            out.append("true" if e.bits else "false")
        else:
            out.append(f"(const {e.width} {e.bits:#x})")
    elif t is LabelConst:
        out.append(f"(label {_quote(e.name)})")
    elif t is BinOp:
        out.append(f"({BINOP_NAMES[e.op]} ")
        _emit(e.left, out)
        out.append(" ")
        _emit(e.right, out)
        out.append(")")
    elif t is UnOp:
        if e.op.is_cast:
            out.append(f"({UNOP_NAMES[e.op]} {e.width} ")
        else:
            out.append(f"({UNOP_NAMES[e.op]} ")
        _emit(e.arg, out)
        out.append(")")
    elif t is Ite:
        out.append("(ite ")
        _emit(e.cond, out)
        out.append(" ")
        _emit(e.then, out)
        out.append(" ")
        _emit(e.else_, out)
        out.append(")")
    elif t is Load:
        out.append("(load ")
        _emit(e.mem, out)
        out.append(" ")
        _emit(e.addr, out)
        out.append(f" {e.width})")
    elif t is Store:
        out.append("(store ")
        _emit(e.mem, out)
        out.append(" ")
        _emit(e.addr, out)
        out.append(" ")
        _emit(e.value, out)
        out.append(f" {e.width})")
    elif t is Subst:
        out.append("(subst ")
        _emit(e.replacement, out)
        out.append(f" {e.var} ")
        _emit(e.body, out)
        out.append(")")
    else:
        raise TypeError(f"not an expression: {e!r}")


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


# --------------------------------------------------------------------------
# Types, values, labels


def to_type(sx) -> BType:
    if sx == "label":
        return LABEL
    if isinstance(sx, list) and len(sx) == 2 and sx[0] in ("reg", "mem"):
        width = _int(sx[1], "width")
        try:
            return Reg(width) if sx[0] == "reg" else Mem(width)
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
    raise ParseError(f"not a type: {sx!r}")


def print_type(t: BType) -> str:
    if t.kind == "label":
        return "label"
    return f"({t.kind} {t.width})"


def to_value(sx):
    if sx == "true":
        return Word(1, 1)
    if sx == "false":
        return Word(1, 0)
    if isinstance(sx, list) and sx and sx[0] == "const":
        _arity(sx, 2)
        try:
            return Word.of(_int(sx[1], "width"), _int(sx[2], "value"))
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
    if isinstance(sx, list) and sx and sx[0] == "label":
        _arity(sx, 1)
        return str(sx[1])
    if isinstance(sx, list) and len(sx) >= 2 and sx[0] == "mem":
        data: dict[int, int] = {}
        for item in sx[2:]:
            if not (isinstance(item, list) and len(item) == 2):
                raise ParseError(f"memory entry must be (ADDR BYTE), got {item!r}")
            data[_int(item[0], "address")] = _int(item[1], "byte")
        try:
            return Memory(_int(sx[1], "address width"), data)
        except ValueError as exc:
            raise ParseError(str(exc)) from exc
    raise ParseError(f"not a value: {sx!r}")


def print_value(v) -> str:
    if type(v) is Word:
        if v.width == 1:
            return "true" if v.bits else "false"
        return f"(const {v.width} {v.bits:#x})"
    if type(v) is Memory:
        cells = "".join(f" ({a:#x} {b:#04x})" for a, b in sorted(v.data.items()))
        return f"(mem {v.addr_width}{cells})"
    if isinstance(v, str):
        return f"(label {_quote(v)})"
    raise TypeError(f"not a value: {v!r}")


def to_label(sx) -> Label:
    if isinstance(sx, Sym):
        raise ParseError(f"label must be an integer or a string literal, got symbol {sx}")
    if isinstance(sx, int):
        if not 0 <= sx < (1 << 64):
            raise ParseError(f"integer label {sx:#x} out of range")
        return sx
    if isinstance(sx, str):
        return sx
    raise ParseError(f"not a label: {sx!r}")


def print_label(label: Label) -> str:
    return f"{label:#x}" if isinstance(label, int) else _quote(label)


def parse_label(text: str) -> Label:
    items = read_all(text)
    if len(items) != 1:
        raise ParseError(f"expected one label, got {text!r}")
    item = items[0]
    if isinstance(item, Sym):
        return str(item)  # convenience on the command line: bare internal label names
    return to_label(item)


# --------------------------------------------------------------------------
# Programs


@dataclass
class ProgramText:
    program: Program
    declared: dict[str, BType] = field(default_factory=dict)


def to_stmt(sx):
    if isinstance(sx, list) and sx and sx[0] == "assign":
        _arity(sx, 2)
        return Assign(_name(sx[1], "variable"), to_expr(sx[2]))
    if isinstance(sx, list) and sx and sx[0] == "assert":
        _arity(sx, 1)
        return Assert(to_expr(sx[1]))
    raise ParseError(f"not a statement: {sx!r}")


def to_cf(sx):
    if isinstance(sx, list) and sx and sx[0] == "jmp":
        _arity(sx, 1)
        return Jmp(to_expr(sx[1]))
    if isinstance(sx, list) and sx and sx[0] == "cjmp":
        _arity(sx, 3)
        return CJmp(to_expr(sx[1]), to_expr(sx[2]), to_expr(sx[3]))
    raise ParseError(f"not a control-flow statement: {sx!r}")


def to_block(sx) -> Block:
    if not (isinstance(sx, list) and len(sx) >= 3 and sx[0] == "block"):
        raise ParseError(f"not a block: {sx!r}")
    label = to_label(sx[1])
    stmts = tuple(to_stmt(s) for s in sx[2:-1])
    return Block(label, stmts, to_cf(sx[-1]))


def parse_declarations(items) -> dict[str, BType]:
    declared: dict[str, BType] = {}
    for item in items:
        if isinstance(item, list) and item and item[0] == "declare":
            _arity(item, 2)
            name = _name(item[1], "variable")
            t = to_type(item[2])
            if declared.get(name, t) is not t:
                raise ParseError(f"conflicting declarations for {name}")
            declared[name] = t
    return declared


def parse_program(text: str) -> ProgramText:
    items = read_all(text)
    blocks = [to_block(i) for i in items if not (isinstance(i, list) and i and i[0] == "declare")]
    try:
        program = Program(tuple(blocks))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    return ProgramText(program, parse_declarations(items))


def print_stmt(s) -> str:
    if type(s) is Assign:
        return f"(assign {s.var} {print_expr(s.expr)})"
    return f"(assert {print_expr(s.cond)})"


def print_cf(cf) -> str:
    if type(cf) is Jmp:
        return f"(jmp {print_expr(cf.target)})"
    return f"(cjmp {print_expr(cf.cond)} {print_expr(cf.then_target)} {print_expr(cf.else_target)})"


def print_program(p: Program, declared: dict[str, BType] | None = None) -> str:
    lines: list[str] = []
    for name in sorted(declared or {}):
        lines.append(f"(declare {name} {print_type(declared[name])})")
    for b in p.blocks:
        lines.append(f"(block {print_label(b.label)}")
        for s in b.stmts:
            lines.append(f"  {print_stmt(s)}")
        lines.append(f"  {print_cf(b.cf)})")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Environments, predicate maps, goals


def parse_env(text: str) -> dict:
    env = {}
    for item in read_all(text):
        if not (isinstance(item, list) and len(item) == 2):
            raise ParseError(f"environment entry must be (NAME VALUE), got {item!r}")
        env[_name(item[0], "variable")] = to_value(item[1])
    return env


def print_env(env) -> str:
    return "".join(f"({name} {print_value(env[name])})\n" for name in sorted(env))


def parse_predmaps(text: str, heads: tuple[str, ...] = ("pred",)) -> tuple[dict[str, dict[Label, Expr]], dict[str, BType]]:
    """Parse ``(HEAD label expr)`` items; returns one map per head plus declarations."""
    items = read_all(text)
    maps: dict[str, dict[Label, Expr]] = {h: {} for h in heads}
    for item in items:
        if isinstance(item, list) and item and item[0] == "declare":
            continue
        if not (isinstance(item, list) and len(item) == 3 and item[0] in heads):
            raise ParseError(f"expected one of {', '.join(heads)} items, got {item!r}")
        label = to_label(item[1])
        target = maps[str(item[0])]
        if label in target:
            raise ParseError(f"label {print_label(label)} given twice in {item[0]}")
        target[label] = to_expr(item[2])
    return maps, parse_declarations(items)


def parse_predmap(text: str) -> dict[Label, Expr]:
    return parse_predmaps(text)[0]["pred"]


def print_predmap(pm, head: str = "pred") -> str:
    from .syntax import label_key

    return "".join(
        f"({head} {print_label(lab)} {print_expr(pm[lab])})\n" for lab in sorted(pm, key=label_key)
    )


def parse_goal(text: str) -> tuple[Expr, Expr, dict[str, BType]]:
    items = read_all(text)
    goals = [i for i in items if isinstance(i, list) and i and i[0] == "goal"]
    if len(goals) != 1:
        raise ParseError("goal file must contain exactly one (goal PREMISE CONCLUSION) item")
    _arity(goals[0], 2)
    return to_expr(goals[0][1]), to_expr(goals[0][2]), parse_declarations(items)
