"""Static type checking for BIR programs and environments.

Variable types are inferred: the first use that fixes a variable's type
wins, and every other use must agree.  Callers may seed the inference with
declared types (the lifter does, since ``R0 := R1 + R0`` alone does not fix
a width).
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from .core import has_subst, type_of_expr
from .syntax import (
    LABEL,
    TYPE_ERROR,
    Assign,
    BinOp,
    BType,
    Const,
    Env,
    Expr,
    Ite,
    Jmp,
    Label,
    LabelConst,
    Load,
    Mem,
    Program,
    Reg,
    Store,
    UnOp,
    UnOpKind,
    Var,
    label_str,
    type_of_value,
)


@dataclass(frozen=True)
class TypingContext:
    types: Mapping[str, BType]
    labels: frozenset[Label]

    def __getitem__(self, name: str) -> BType:
        return self.types[name]


@dataclass(frozen=True)
class TypeDiagnostic:
    label: Label
    index: int  # statement index; len(stmts) designates the control-flow statement
    message: str

    def to_dict(self) -> dict:
        return {"label": self.label if isinstance(self.label, str) else f"{self.label:#x}",
                "index": self.index, "message": self.message}

    def __str__(self) -> str:
        return f"block {label_str(self.label)}, statement {self.index}: {self.message}"


class ProgramTypeError(Exception):
    def __init__(self, diagnostics: list[TypeDiagnostic]) -> None:
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


class _Inference:
    def __init__(self, declared: Mapping[str, BType]) -> None:
        self.types: dict[str, BType] = dict(declared)
        self.changed = False

    def fix(self, name: str, t: BType) -> None:
        if name not in self.types:
            self.types[name] = t
            self.changed = True

    def push(self, e: Expr, t: BType) -> None:
        """Propagate an expected type into ``e``."""
        if type(e) is Var:
            self.fix(e.name, t)
        elif type(e) is BinOp and e.op.is_arith and t.kind == "reg":
            self.push(e.left, t)
            self.push(e.right, t)
        elif type(e) is BinOp and e.op.is_bool:
            self.push(e.left, t)
            self.push(e.right, t)
        elif type(e) is UnOp and e.op in (UnOpKind.NOT, UnOpKind.NEG):
            self.push(e.arg, t)
        elif type(e) is Ite:
            self.push(e.cond, Reg(1))
            self.push(e.then, t)
            self.push(e.else_, t)
        elif type(e) is Store and t.kind == "mem":
            self.push(e.mem, t)
            self.push(e.addr, Reg(t.width))
            self.push(e.value, Reg(e.width))
        else:
            self.synth(e)

    def synth(self, e: Expr) -> BType | None:
        t = type(e)
        if t is Var:
            return self.types.get(e.name)
        if t is Const:
            return Reg(e.width)
        if t is LabelConst:
            return LABEL
        if t is BinOp:
            if e.op.is_bool:
                self.push(e.left, Reg(1))
                self.push(e.right, Reg(1))
                return Reg(1)
            a = self.synth(e.left)
            b = self.synth(e.right)
            if a is not None and b is None:
                self.push(e.right, a)
            elif b is not None and a is None:
                self.push(e.left, b)
            if e.op.is_compare:
                return Reg(1)
            return a or b
        if t is UnOp:
            a = self.synth(e.arg)
            if e.op in (UnOpKind.NOT, UnOpKind.NEG):
                return a
            return Reg(e.width)
        if t is Ite:
            self.push(e.cond, Reg(1))
            a = self.synth(e.then)
            b = self.synth(e.else_)
            if a is not None and b is None:
                self.push(e.else_, a)
            elif b is not None and a is None:
                self.push(e.then, b)
            return a or b
        if t is Load:
            self._memory_operands(e.mem, e.addr)
            return Reg(e.width)
        if t is Store:
            m = self._memory_operands(e.mem, e.addr)
            self.push(e.value, Reg(e.width))
            return m
        return None

    def _memory_operands(self, mem: Expr, addr: Expr) -> BType | None:
        m = self.synth(mem)
        a = self.synth(addr)
        if m is not None and m.kind == "mem" and a is None:
            self.push(addr, Reg(m.width))
        elif m is None and a is not None and a.kind == "reg" and a.width in (32, 64):
            self.push(mem, Mem(a.width))
            m = Mem(a.width)
        return m


def _used_names(p: Program) -> list[str]:
    from .core import free_vars

    names: dict[str, None] = {}
    for b in p.blocks:
        for s in b.stmts:
            if type(s) is Assign:
                names[s.var] = None
                exprs = (s.expr,)
            else:
                exprs = (s.cond,)
            for e in exprs:
                names.update(dict.fromkeys(sorted(free_vars(e))))
        cf = b.cf
        exprs = (cf.target,) if type(cf) is Jmp else (cf.cond, cf.then_target, cf.else_target)
        for e in exprs:
            names.update(dict.fromkeys(sorted(free_vars(e))))
    return list(names)


def infer_types(p: Program, declared: Mapping[str, BType] | None = None) -> dict[str, BType]:
    """Fixpoint type inference; variables whose type cannot be fixed are left out."""
    inf = _Inference(declared or {})
    while True:
        inf.changed = False
        for b in p.blocks:
            for s in b.stmts:
                if type(s) is Assign:
                    t = inf.synth(s.expr)
                    if t is not None:
                        inf.fix(s.var, t)
                    elif s.var in inf.types:
                        inf.push(s.expr, inf.types[s.var])
                else:
                    inf.push(s.cond, Reg(1))
            cf = b.cf
            if type(cf) is Jmp:
                inf.synth(cf.target)
            else:
                inf.push(cf.cond, Reg(1))
                inf.synth(cf.then_target)
                inf.synth(cf.else_target)
        if not inf.changed:
            return inf.types


def _target_ok(t) -> bool:
    return t is not TYPE_ERROR and (t.kind == "reg" or t is LABEL)


def diagnose_program(
    p: Program, declared: Mapping[str, BType] | None = None
) -> tuple[dict[str, BType], list[TypeDiagnostic]]:
    types = infer_types(p, declared)
    diags: list[TypeDiagnostic] = []

    def report(label, index, message):
        diags.append(TypeDiagnostic(label, index, message))

    for b in p.blocks:
        for i, s in enumerate(b.stmts):
            e = s.expr if type(s) is Assign else s.cond
            if has_subst(e):
                report(b.label, i, "explicit substitution is not allowed in program statements")
                continue
            t = type_of_expr(e, types)
            if type(s) is Assign:
                if t is TYPE_ERROR:
                    report(b.label, i, f"ill-typed right-hand side for {s.var}")
                elif types.get(s.var) is not t:
                    report(b.label, i, f"conflicting types for {s.var}: {types.get(s.var)!r} vs {t!r}")
            elif t is not Reg(1):
                report(b.label, i, "condition must be Reg1")
        k = len(b.stmts)
        cf = b.cf
        if type(cf) is Jmp:
            targets = (cf.target,)
        else:
            targets = (cf.then_target, cf.else_target)
            if has_subst(cf.cond):
                report(b.label, k, "explicit substitution is not allowed in program statements")
            elif type_of_expr(cf.cond, types) is not Reg(1):
                report(b.label, k, "condition must be Reg1")
        for e in targets:
            if has_subst(e):
                report(b.label, k, "explicit substitution is not allowed in program statements")
            elif not _target_ok(type_of_expr(e, types)):
                report(b.label, k, "jump target must be word- or label-typed")
    missing = [n for n in _used_names(p) if n not in types]
    for n in missing:
        diags.insert(0, TypeDiagnostic(_first_use(p, n), -1, f"cannot infer type of {n}"))
    return types, diags


def _first_use(p: Program, name: str) -> Label:
    from .core import free_vars

    for b in p.blocks:
        for s in b.stmts:
            if (type(s) is Assign and s.var == name) or name in free_vars(
                s.expr if type(s) is Assign else s.cond
            ):
                return b.label
    return p.blocks[0].label if p.blocks else ""


def check_program(p: Program, declared: Mapping[str, BType] | None = None) -> TypingContext:
    """Infer and check the program's typing; raises ``ProgramTypeError`` with diagnostics."""
    types, diags = diagnose_program(p, declared)
    if diags:
        raise ProgramTypeError(diags)
    return TypingContext(types, frozenset(p.index))


def check_env(env: Env, ctx: TypingContext | Mapping[str, BType]) -> bool:
    """Every variable of ``ctx`` is bound in ``env`` with its type."""
    types = ctx.types if isinstance(ctx, TypingContext) else ctx
    for name, t in types.items():
        v = env.get(name)
        if v is None or type_of_value(v) is not t:
            return False
    return True
