"""Pure-Python evaluation kernel.

This is the reference implementation of the hot path (expression
evaluation, block execution, the weak transition loop).  ``_evalc`` is a
compiled twin with identical behaviour; ``_backend`` picks one at import.
"""

from __future__ import annotations

from .syntax import (
    DIVERGED,
    FAILED,
    TYPE_ERROR,
    Assign,
    BinOpKind,
    Jmp,
    Memory,
    T_BINOP,
    T_CONST,
    T_ITE,
    T_LABEL,
    T_LOAD,
    T_STORE,
    T_SUBST,
    T_UNOP,
    T_VAR,
    UnOpKind,
    Word,
)

BACKEND = "python"

_new = object.__new__
_TRUE = Word(1, 1)
_FALSE = Word(1, 0)

ADD, SUB, MUL, AND, OR, XOR, SHL, LSHR, ASHR, EQ, ULT, SLT, LAND, LOR, IMPLIES = (
    int(k) for k in BinOpKind
)
NOT, NEG, ZEXT, SEXT, TRUNC = (int(k) for k in UnOpKind)


class _TypeErr(Exception):
    pass


def _word(width, bits):
    w = _new(Word)
    w.width = width
    w.bits = bits
    return w


def _same_type(a, b):
    ta = type(a)
    if ta is not type(b):
        return False
    if ta is Word:
        return a.width == b.width
    if ta is Memory:
        return a.addr_width == b.addr_width
    return True  # both labels


def _ev(e, env):
    tag = e.tag
    if tag == T_VAR:
        try:
            return env[e.name]
        except KeyError:
            raise _TypeErr from None
    if tag == T_CONST:
        return _word(e.width, e.bits)
    if tag == T_BINOP:
        a = _ev(e.left, env)
        b = _ev(e.right, env)
        op = e.op
        if type(a) is not Word or type(b) is not Word:
            if op == EQ and type(a) is Memory and type(b) is Memory and a.addr_width == b.addr_width:
                return _TRUE if a.data == b.data else _FALSE
            raise _TypeErr
        w = a.width
        if w != b.width:
            raise _TypeErr
        x = a.bits
        y = b.bits
        mask = (1 << w) - 1
        if op == ADD:
            return _word(w, (x + y) & mask)
        if op == SUB:
            return _word(w, (x - y) & mask)
        if op == AND:
            return _word(w, x & y)
        if op == OR:
            return _word(w, x | y)
        if op == XOR:
            return _word(w, x ^ y)
        if op == EQ:
            return _TRUE if x == y else _FALSE
        if op == ULT:
            return _TRUE if x < y else _FALSE
        if op == SLT:
            top = 1 << (w - 1)
            return _TRUE if (x ^ top) < (y ^ top) else _FALSE
        if op == MUL:
            return _word(w, (x * y) & mask)
        if op == SHL:
            return _word(w, (x << (y % w)) & mask)
        if op == LSHR:
            return _word(w, x >> (y % w))
        if op == ASHR:
            sx = x - (1 << w) if x >> (w - 1) else x
            return _word(w, (sx >> (y % w)) & mask)
        if w != 1:
            raise _TypeErr
        if op == LAND:
            return _TRUE if x & y else _FALSE
        if op == LOR:
            return _TRUE if x | y else _FALSE
        # IMPLIES
        return _TRUE if (not x) or y else _FALSE
    if tag == T_UNOP:
        a = _ev(e.arg, env)
        if type(a) is not Word:
            raise _TypeErr
        op = e.op
        w = a.width
        if op == NOT:
            return _word(w, a.bits ^ ((1 << w) - 1))
        if op == NEG:
            return _word(w, (-a.bits) & ((1 << w) - 1))
        n = e.width
        if op == ZEXT:
            if n < w:
                raise _TypeErr
            return _word(n, a.bits)
        if op == SEXT:
            if n < w:
                raise _TypeErr
            x = a.bits
            if x >> (w - 1):
                x = x - (1 << w)
            return _word(n, x & ((1 << n) - 1))
        # TRUNC
        if n > w:
            raise _TypeErr
        return _word(n, a.bits & ((1 << n) - 1))
    if tag == T_ITE:
        cnd = _ev(e.cond, env)
        a = _ev(e.then, env)
        b = _ev(e.else_, env)
        if type(cnd) is not Word or cnd.width != 1 or not _same_type(a, b):
            raise _TypeErr
        return a if cnd.bits else b
    if tag == T_LOAD:
        m = _ev(e.mem, env)
        ad = _ev(e.addr, env)
        if type(m) is not Memory or type(ad) is not Word or ad.width != m.addr_width:
            raise _TypeErr
        n = e.width
        return _word(n, m.load(ad.bits, n >> 3))
    if tag == T_STORE:
        m = _ev(e.mem, env)
        ad = _ev(e.addr, env)
        v = _ev(e.value, env)
        if (
            type(m) is not Memory
            or type(ad) is not Word
            or ad.width != m.addr_width
            or type(v) is not Word
            or v.width != e.width
        ):
            raise _TypeErr
        return m.store(ad.bits, e.width >> 3, v.bits)
    if tag == T_LABEL:
        return e.name
    if tag == T_SUBST:
        r = _ev(e.replacement, env)
        inner = dict(env)
        inner[e.var] = r
        return _ev(e.body, inner)
    raise _TypeErr


def eval_expr(e, env):
    """Evaluate ``e`` in ``env``; returns a value or ``TYPE_ERROR``."""
    try:
        return _ev(e, env)
    except _TypeErr:
        return TYPE_ERROR


def _target(e, env):
    v = _ev(e, env)
    if type(v) is Word:
        return v.bits
    if type(v) is str:
        return v
    raise _TypeErr


def run_stmts(stmts, env):
    """Run statements on ``env`` in place; returns None, FAILED or TYPE_ERROR."""
    try:
        for s in stmts:
            if type(s) is Assign:
                v = _ev(s.expr, env)
                old = env.get(s.var)
                if old is not None and not _same_type(old, v):
                    return TYPE_ERROR
                env[s.var] = v
            else:
                v = _ev(s.cond, env)
                if type(v) is not Word or v.width != 1:
                    return TYPE_ERROR
                if not v.bits:
                    return FAILED
    except _TypeErr:
        return TYPE_ERROR
    return None


def run_block(block, env):
    """Execute ``block`` from ``env``; returns ``(env', target)`` with a fresh env.

    The target is not checked against the program; callers decide whether a
    missing label is a failure or an exit.
    """
    env = dict(env)
    err = run_stmts(block.stmts, env)
    if err is not None:
        return env, err
    cf = block.cf
    try:
        if type(cf) is Jmp:
            pc = _target(cf.target, env)
        else:
            cnd = _ev(cf.cond, env)
            t1 = _target(cf.then_target, env)
            t2 = _target(cf.else_target, env)
            if type(cnd) is not Word or cnd.width != 1:
                return env, TYPE_ERROR
            pc = t1 if cnd.bits else t2
    except _TypeErr:
        return env, TYPE_ERROR
    return env, pc


def weak_run(index, env, pc, ls, fuel):
    """Iterate blocks until ``pc`` is in ``ls``, an error, or fuel runs out."""
    if pc in ls:
        return env, pc
    while True:
        block = index.get(pc)
        if block is None:
            return env, FAILED
        env, pc = run_block(block, env)
        if pc is FAILED or pc is TYPE_ERROR or pc in ls:
            return env, pc
        if pc not in index:
            return env, FAILED
        fuel -= 1
        if fuel <= 0:
            return DIVERGED
