# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernel; behaviour must match ``_evalpy`` exactly.

Word values never exceed 64 bits, so arithmetic runs on ``unsigned long
long`` with explicit masking.  Values are still the shared ``Word`` and
``Memory`` Python objects.
"""

from .syntax import (
    BinOp,
    Const,
    Ite,
    LabelConst,
    Load,
    Store,
    Subst,
    UnOp,
    Var,
    DIVERGED,
    FAILED,
    TYPE_ERROR,
    Assign,
    BinOpKind,
    Jmp,
    Memory,
    UnOpKind,
    Word,
)

BACKEND = "cython"

ctypedef unsigned long long u64

cdef object _Word = Word
cdef object _Memory = Memory
cdef object _Assign = Assign
cdef object _Jmp = Jmp
cdef object _FAILED = FAILED
cdef object _TYPE_ERROR = TYPE_ERROR
cdef object _DIVERGED = DIVERGED
cdef object _new = object.__new__

cdef int ADD = BinOpKind.ADD, SUB = BinOpKind.SUB, MUL = BinOpKind.MUL
cdef int AND = BinOpKind.AND, OR = BinOpKind.OR, XOR = BinOpKind.XOR
cdef int SHL = BinOpKind.SHL, LSHR = BinOpKind.LSHR, ASHR = BinOpKind.ASHR
cdef int EQ = BinOpKind.EQ, ULT = BinOpKind.ULT, SLT = BinOpKind.SLT
cdef int LAND = BinOpKind.LAND, LOR = BinOpKind.LOR, IMPLIES = BinOpKind.IMPLIES
cdef int NOT = UnOpKind.NOT, NEG = UnOpKind.NEG, ZEXT = UnOpKind.ZEXT
cdef int SEXT = UnOpKind.SEXT, TRUNC = UnOpKind.TRUNC

cdef object _Var = Var, _Const = Const, _BinOp = BinOp, _UnOp = UnOp, _Ite = Ite
cdef object _Load = Load, _Store = Store, _LabelConst = LabelConst, _Subst = Subst


class _TypeErr(Exception):
    pass


cdef inline u64 _mask(int w):
    if w >= 64:
        return <u64>0xFFFFFFFFFFFFFFFF
    return ((<u64>1) << w) - 1


cdef list _SMALL = [None] * 65  # width -> list of cached words with bits < 256


cdef object _make(int width, u64 bits):
    w = _new(_Word)
    w.width = width
    w.bits = bits
    return w


for _w in (1, 8, 16, 32, 64):
    _SMALL[_w] = [_make(_w, _b) for _b in range(min(256, 1 << _w))]


cdef inline object _word(int width, u64 bits):
    cdef list cache
    if bits < 256:
        cache = <list>_SMALL[width]
        if bits < <u64>len(cache):
            return cache[bits]
    return _make(width, bits)


cdef object _TRUE = _word(1, 1)
cdef object _FALSE = _word(1, 0)


cdef bint _same_type(a, b):
    ta = type(a)
    if ta is not type(b):
        return False
    if ta is _Word:
        return a.width == b.width
    if ta is _Memory:
        return a.addr_width == b.addr_width
    return True


cdef u64 _load(m, u64 addr, int nbytes):
    cdef dict data = m.data
    cdef int aw = m.addr_width
    cdef u64 amask = _mask(aw), value = 0, b
    cdef int i
    for i in range(nbytes):
        o = data.get((addr + <u64>i) & amask)
        if o is not None:
            b = o
            value |= b << (8 * i)
    return value


cdef object _store(m, u64 addr, int nbytes, u64 value):
    cdef dict data = dict(m.data)
    cdef int aw = m.addr_width
    cdef u64 amask = _mask(aw), a, b
    cdef int i
    for i in range(nbytes):
        b = (value >> (8 * i)) & 0xFF
        a = (addr + <u64>i) & amask
        if b:
            data[a] = b
        else:
            data.pop(a, None)
    out = _new(_Memory)
    out.addr_width = aw
    out.data = data
    out._hash = None
    return out


cdef inline long long _signed(u64 x, int w):
    if w >= 64:
        return <long long>x
    if (x >> (w - 1)) & 1:
        return <long long>(x | ~_mask(w))
    return <long long>x


cdef object _ev(e, dict env):
    cdef object te = type(e)
    cdef int op, w, n
    cdef u64 x, y, mask, top, sh
    cdef long long sx
    if te is _Var:
        v = env.get(e.name)
        if v is None:
            raise _TypeErr()
        return v
    if te is _Const:
        return _word(e.width, e.bits)
    if te is _BinOp:
        a = _ev(e.left, env)
        b = _ev(e.right, env)
        op = e.op
        if type(a) is not _Word or type(b) is not _Word:
            if op == EQ and type(a) is _Memory and type(b) is _Memory and a.addr_width == b.addr_width:
                return _TRUE if a.data == b.data else _FALSE
            raise _TypeErr()
        w = a.width
        if w != <int>b.width:
            raise _TypeErr()
        x = a.bits
        y = b.bits
        mask = _mask(w)
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
            top = (<u64>1) << (w - 1)
            return _TRUE if (x ^ top) < (y ^ top) else _FALSE
        if op == MUL:
            return _word(w, (x * y) & mask)
        if op == SHL:
            sh = y % <u64>w
            return _word(w, (x << sh) & mask)
        if op == LSHR:
            sh = y % <u64>w
            return _word(w, x >> sh)
        if op == ASHR:
            sh = y % <u64>w
            sx = _signed(x, w)
            return _word(w, (<u64>(sx >> sh)) & mask)
        if w != 1:
            raise _TypeErr()
        if op == LAND:
            return _TRUE if (x & y) else _FALSE
        if op == LOR:
            return _TRUE if (x | y) else _FALSE
        return _TRUE if ((not x) or y) else _FALSE
    if te is _UnOp:
        a = _ev(e.arg, env)
        if type(a) is not _Word:
            raise _TypeErr()
        op = e.op
        w = a.width
        x = a.bits
        if op == NOT:
            return _word(w, x ^ _mask(w))
        if op == NEG:
            return _word(w, (<u64>0 - x) & _mask(w))
        n = e.width
        if op == ZEXT:
            if n < w:
                raise _TypeErr()
            return _word(n, x)
        if op == SEXT:
            if n < w:
                raise _TypeErr()
            return _word(n, (<u64>_signed(x, w)) & _mask(n))
        if n > w:
            raise _TypeErr()
        return _word(n, x & _mask(n))
    if te is _Ite:
        cnd = _ev(e.cond, env)
        a = _ev(e.then, env)
        b = _ev(e.else_, env)
        if type(cnd) is not _Word or cnd.width != 1 or not _same_type(a, b):
            raise _TypeErr()
        return a if cnd.bits else b
    if te is _Load:
        m = _ev(e.mem, env)
        ad = _ev(e.addr, env)
        if type(m) is not _Memory or type(ad) is not _Word or ad.width != m.addr_width:
            raise _TypeErr()
        n = e.width
        return _word(n, _load(m, ad.bits, n >> 3))
    if te is _Store:
        m = _ev(e.mem, env)
        ad = _ev(e.addr, env)
        v = _ev(e.value, env)
        if (
            type(m) is not _Memory
            or type(ad) is not _Word
            or ad.width != m.addr_width
            or type(v) is not _Word
            or v.width != e.width
        ):
            raise _TypeErr()
        return _store(m, ad.bits, e.width >> 3, v.bits)
    if te is _LabelConst:
        return e.name
    if te is _Subst:
        r = _ev(e.replacement, env)
        inner = dict(env)
        inner[e.var] = r
        return _ev(e.body, inner)
    raise _TypeErr()


def eval_expr(e, env):
    """Evaluate ``e`` in ``env``; returns a value or ``TYPE_ERROR``."""
    try:
        return _ev(e, env if type(env) is dict else dict(env))
    except _TypeErr:
        return _TYPE_ERROR


cdef object _target(e, dict env):
    v = _ev(e, env)
    if type(v) is _Word:
        return v.bits
    if type(v) is str:
        return v
    raise _TypeErr()


cdef object _run_stmts(stmts, dict env):
    try:
        for s in stmts:
            if type(s) is _Assign:
                v = _ev(s.expr, env)
                old = env.get(s.var)
                if old is not None and not _same_type(old, v):
                    return _TYPE_ERROR
                env[s.var] = v
            else:
                v = _ev(s.cond, env)
                if type(v) is not _Word or v.width != 1:
                    return _TYPE_ERROR
                if not v.bits:
                    return _FAILED
    except _TypeErr:
        return _TYPE_ERROR
    return None


def run_stmts(stmts, env):
    """Run statements on ``env`` in place; returns None, FAILED or TYPE_ERROR."""
    return _run_stmts(stmts, env)


cdef tuple _run_block(block, env):
    cdef dict e2 = dict(env)
    err = _run_stmts(block.stmts, e2)
    if err is not None:
        return e2, err
    cf = block.cf
    try:
        if type(cf) is _Jmp:
            pc = _target(cf.target, e2)
        else:
            cnd = _ev(cf.cond, e2)
            t1 = _target(cf.then_target, e2)
            t2 = _target(cf.else_target, e2)
            if type(cnd) is not _Word or cnd.width != 1:
                return e2, _TYPE_ERROR
            pc = t1 if cnd.bits else t2
    except _TypeErr:
        return e2, _TYPE_ERROR
    return e2, pc


def run_block(block, env):
    """Execute ``block`` from ``env``; returns ``(env', target)`` with a fresh env."""
    return _run_block(block, env)


def weak_run(index, env, pc, ls, long fuel):
    """Iterate blocks until ``pc`` is in ``ls``, an error, or fuel runs out."""
    if pc in ls:
        return env, pc
    while True:
        block = index.get(pc)
        if block is None:
            return env, _FAILED
        env, pc = _run_block(block, env)
        if pc is _FAILED or pc is _TYPE_ERROR or pc in ls:
            return env, pc
        if pc not in index:
            return env, _FAILED
        fuel -= 1
        if fuel <= 0:
            return _DIVERGED
