"""Evaluation, static typing, free variables and substitution utilities for BIR expressions."""

from __future__ import annotations

from collections.abc import Iterable, Mapping

from . import _backend
from .syntax import (
    LABEL,
    TYPE_ERROR,
    BinOp,
    BinOpKind,
    BType,
    Const,
    Expr,
    Ite,
    LabelConst,
    Load,
    Mem,
    Outcome,
    Reg,
    Store,
    Subst,
    UnOp,
    UnOpKind,
    Var,
)

Typing = Mapping[str, BType]


def eval_expr(e: Expr, env):
    """Evaluate ``e``; the result is a ``Word``, ``Memory``, label string, or ``TYPE_ERROR``.

    Evaluation is total: unbound variables and operand mismatches give
    ``TYPE_ERROR`` instead of raising.  Use ``type_of_value`` for the type
    half of an ``Ok(type, value)`` result.
    """
    return _backend.eval_expr(e, env)


# --------------------------------------------------------------------------
# Static typing


def type_of_expr(e: Expr, typing: Typing) -> BType | Outcome:
    """Static type of ``e`` under ``typing``, or ``TYPE_ERROR``."""
    return _type_of(e, typing, {})


def _type_of(e: Expr, typing: Typing, memo: dict[int, BType | Outcome]) -> BType | Outcome:
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit
    t = _type_of_node(e, typing, memo)
    memo[key] = t
    return t


def _type_of_node(e, typing, memo):
    if type(e) is Var:
        return typing.get(e.name, TYPE_ERROR)
    if type(e) is Const:
        return Reg(e.width)
    if type(e) is LabelConst:
        return LABEL
    if type(e) is BinOp:
        a = _type_of(e.left, typing, memo)
        b = _type_of(e.right, typing, memo)
        if a is TYPE_ERROR or a is not b:
            return TYPE_ERROR
        if a.kind == "mem":
            return Reg(1) if e.op == BinOpKind.EQ else TYPE_ERROR
        if a.kind != "reg":
            return TYPE_ERROR
        if e.op.is_arith:
            return a
        if e.op.is_compare:
            return Reg(1)
        return a if a.width == 1 else TYPE_ERROR
    if type(e) is UnOp:
        a = _type_of(e.arg, typing, memo)
        if a is TYPE_ERROR or a.kind != "reg":
            return TYPE_ERROR
        if e.op in (UnOpKind.NOT, UnOpKind.NEG):
            return a
        if e.op == UnOpKind.TRUNC:
            return Reg(e.width) if e.width <= a.width else TYPE_ERROR
        return Reg(e.width) if e.width >= a.width else TYPE_ERROR
    if type(e) is Ite:
        cnd = _type_of(e.cond, typing, memo)
        a = _type_of(e.then, typing, memo)
        b = _type_of(e.else_, typing, memo)
        if cnd is not Reg(1) or a is TYPE_ERROR or a is not b:
            return TYPE_ERROR
        return a
    if type(e) is Load:
        m = _type_of(e.mem, typing, memo)
        ad = _type_of(e.addr, typing, memo)
        if m is TYPE_ERROR or m.kind != "mem" or ad is not Reg(m.width):
            return TYPE_ERROR
        return Reg(e.width)
    if type(e) is Store:
        m = _type_of(e.mem, typing, memo)
        ad = _type_of(e.addr, typing, memo)
        v = _type_of(e.value, typing, memo)
        if m is TYPE_ERROR or m.kind != "mem" or ad is not Reg(m.width) or v is not Reg(e.width):
            return TYPE_ERROR
        return m
    if type(e) is Subst:
        r = _type_of(e.replacement, typing, memo)
        if r is TYPE_ERROR:
            return TYPE_ERROR
        inner = dict(typing)
        inner[e.var] = r
        return _type_of(e.body, inner, {})
    return TYPE_ERROR


def mem_type(addr_width: int) -> BType:
    return Mem(addr_width)


# --------------------------------------------------------------------------
# Names


def free_vars(e: Expr) -> frozenset[str]:
    """Free variable names; ``Subst(E, v, A)`` binds ``v`` in ``A`` only."""
    return _fv(e, {})


def _fv(e: Expr, memo: dict[int, frozenset[str]]) -> frozenset[str]:
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if type(e) is Var:
        out = frozenset((e.name,))
    elif type(e) is Subst:
        out = _fv(e.replacement, memo) | (_fv(e.body, memo) - {e.var})
    else:
        out = frozenset()
        for ch in e.children():
            out = out | _fv(ch, memo)
    memo[key] = out
    return out


def all_names(e: Expr) -> set[str]:
    """Every variable name in ``e``, free or bound."""
    seen: set[int] = set()
    names: set[str] = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        if type(x) is Var:
            names.add(x.name)
        elif type(x) is Subst:
            names.add(x.var)
        stack.extend(x.children())
    return names


def fresh_name(avoid: Iterable[str], hint: str) -> str:
    """``hint`` if unused, else the first of ``hint_1``, ``hint_2``, ... not in ``avoid``."""
    avoid = avoid if isinstance(avoid, (set, frozenset)) else set(avoid)
    if hint not in avoid:
        return hint
    i = 1
    while f"{hint}_{i}" in avoid:
        i += 1
    return f"{hint}_{i}"


def has_subst(e: Expr) -> bool:
    seen: set[int] = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if type(x) is Subst:
            return True
        if id(x) in seen:
            continue
        seen.add(id(x))
        stack.extend(x.children())
    return False


# --------------------------------------------------------------------------
# Size measures


def node_count(e: Expr, shared: bool = False) -> int:
    """Number of nodes, counting a ``Subst`` as one node plus its two operands.

    With ``shared=True`` every distinct node object is counted once (the DAG
    size); otherwise the size of the fully unfolded tree.
    """
    if shared:
        seen: set[int] = set()
        stack = [e]
        while stack:
            x = stack.pop()
            if id(x) in seen:
                continue
            seen.add(id(x))
            stack.extend(x.children())
        return len(seen)
    memo: dict[int, int] = {}

    def tree(x: Expr) -> int:
        hit = memo.get(id(x))
        if hit is None:
            hit = 1 + sum(tree(ch) for ch in x.children())
            memo[id(x)] = hit
        return hit

    return tree(e)


def var_occurrences(e: Expr, name: str | None = None) -> int:
    """Occurrences of variables (or of one variable) in the unfolded tree."""
    memo: dict[int, int] = {}

    def occ(x: Expr) -> int:
        hit = memo.get(id(x))
        if hit is None:
            if type(x) is Var:
                hit = 1 if name is None or x.name == name else 0
            else:
                hit = sum(occ(ch) for ch in x.children())
            memo[id(x)] = hit
        return hit

    return occ(e)


# --------------------------------------------------------------------------
# Substitution


def replace_var(e: Expr, name: str, repl: Expr) -> Expr:
    """Replace free occurrences of ``name`` in ``e`` by ``repl`` (capture is the caller's problem).

    Shared subterms stay shared, so the result is a DAG even when the
    unfolded tree is exponentially large.
    """
    memo: dict[int, Expr] = {}

    def go(x: Expr) -> Expr:
        hit = memo.get(id(x))
        if hit is not None:
            return hit
        if type(x) is Var:
            out = repl if x.name == name else x
        elif type(x) is Subst:
            r = go(x.replacement)
            body = x.body if x.var == name else go(x.body)
            out = x if (r is x.replacement and body is x.body) else Subst(r, x.var, body)
        else:
            out = _rebuild(x, [go(ch) for ch in x.children()])
        memo[id(x)] = out
        return out

    return go(e)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneous replacement of free variables; ``e`` must be substitution-free."""
    memo: dict[int, Expr] = {}

    def go(x: Expr) -> Expr:
        hit = memo.get(id(x))
        if hit is not None:
            return hit
        if type(x) is Var:
            out = mapping.get(x.name, x)
        elif type(x) is Subst:
            raise ValueError("substitute() needs a substitution-free expression")
        else:
            out = _rebuild(x, [go(ch) for ch in x.children()])
        memo[id(x)] = out
        return out

    return go(e)


def expand_substs(e: Expr) -> Expr:
    """Naively apply every explicit substitution, innermost first."""
    memo: dict[int, Expr] = {}

    def go(x: Expr) -> Expr:
        hit = memo.get(id(x))
        if hit is not None:
            return hit
        if type(x) is Subst:
            out = replace_var(go(x.body), x.var, go(x.replacement))
        else:
            out = _rebuild(x, [go(ch) for ch in x.children()])
        memo[id(x)] = out
        return out

    return go(e)


def _rebuild(x: Expr, kids: list[Expr]) -> Expr:
    old = x.children()
    if all(a is b for a, b in zip(old, kids)):
        return x
    if type(x) is BinOp:
        return BinOp(x.op, kids[0], kids[1])
    if type(x) is UnOp:
        return UnOp(x.op, kids[0], x.width)
    if type(x) is Ite:
        return Ite(kids[0], kids[1], kids[2])
    if type(x) is Load:
        return Load(kids[0], kids[1], x.width)
    if type(x) is Store:
        return Store(kids[0], kids[1], kids[2], x.width)
    if type(x) is Subst:
        return Subst(kids[0], x.var, kids[1])
    raise TypeError(f"cannot rebuild {type(x).__name__}")


rebuild = _rebuild
