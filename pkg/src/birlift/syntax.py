"""BIR syntax: types, runtime values, expressions, statements, blocks, programs.

Everything here is immutable after construction.  Expression nodes carry an
integer ``tag`` class attribute that the evaluation kernels dispatch on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import ClassVar, Union

WORD_WIDTHS = (1, 8, 16, 32, 64)
ADDR_WIDTHS = (32, 64)
ACCESS_WIDTHS = (8, 16, 32, 64)


# --------------------------------------------------------------------------
# Types


class BType:
    """A BIR type: ``Reg(n)``, ``Mem(a)`` or the label type.

    Instances are interned, so identity comparison is type equality.
    """

    __slots__ = ("kind", "width")
    _cache: ClassVar[dict[tuple[str, int], BType]] = {}

    kind: str
    width: int

    def __new__(cls, kind: str, width: int) -> BType:
        key = (kind, width)
        try:
            return cls._cache[key]
        except KeyError:
            pass
        if kind == "reg" and width not in WORD_WIDTHS:
            raise ValueError(f"unsupported word width {width}")
        if kind == "mem" and width not in ADDR_WIDTHS:
            raise ValueError(f"unsupported address width {width}")
        if kind not in ("reg", "mem", "label"):
            raise ValueError(f"unknown type kind {kind!r}")
        self = object.__new__(cls)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "width", width)
        cls._cache[key] = self
        return self

    def __setattr__(self, name, value):
        raise AttributeError("BType is immutable")

    def __reduce__(self):
        return (BType, (self.kind, self.width))

    @property
    def is_reg(self) -> bool:
        return self.kind == "reg"

    @property
    def is_mem(self) -> bool:
        return self.kind == "mem"

    def __repr__(self) -> str:
        if self.kind == "reg":
            return f"Reg{self.width}"
        if self.kind == "mem":
            return f"Mem{self.width}"
        return "Label"


def Reg(n: int) -> BType:
    return BType("reg", n)


def Mem(a: int) -> BType:
    return BType("mem", a)


LABEL = BType("label", 0)
BOOL = Reg(1)


# --------------------------------------------------------------------------
# Outcome sentinels


class Outcome(enum.Enum):
    """Non-value results: the type error (bullet), failed assertion (bottom), divergence."""

    TYPE_ERROR = "type-error"
    FAILED = "failed"
    DIVERGED = "diverged"

    def __repr__(self) -> str:
        return self.name


TYPE_ERROR = Outcome.TYPE_ERROR
FAILED = Outcome.FAILED
DIVERGED = Outcome.DIVERGED


# --------------------------------------------------------------------------
# Values


class Word:
    """A fixed-width bitvector value; ``bits`` is always below ``2**width``."""

    __slots__ = ("width", "bits")

    def __init__(self, width: int, bits: int) -> None:
        if width not in WORD_WIDTHS:
            raise ValueError(f"unsupported word width {width}")
        if not 0 <= bits < (1 << width):
            raise ValueError(f"{bits:#x} does not fit in {width} bits")
        self.width = width
        self.bits = bits

    @classmethod
    def of(cls, width: int, value: int) -> Word:
        """Build a word from any integer, reducing it modulo ``2**width``."""
        return cls(width, value & ((1 << width) - 1))

    @property
    def type(self) -> BType:
        return BType("reg", self.width)

    def signed(self) -> int:
        if self.bits >> (self.width - 1):
            return self.bits - (1 << self.width)
        return self.bits

    def __eq__(self, other: object) -> bool:
        if type(other) is not Word:
            return NotImplemented
        return self.width == other.width and self.bits == other.bits

    def __hash__(self) -> int:
        return hash((self.width, self.bits))

    def __repr__(self) -> str:
        return f"Word({self.width}, {self.bits:#x})"


TRUE = Word(1, 1)
FALSE = Word(1, 0)


class Memory:
    """A total byte map with default 0.

    Only nonzero bytes are stored, so two memories are equal exactly when
    their ``data`` dicts are.  ``store`` returns a new memory.
    """

    __slots__ = ("addr_width", "data", "_hash")

    def __init__(self, addr_width: int, data: dict[int, int] | None = None) -> None:
        if addr_width not in ADDR_WIDTHS:
            raise ValueError(f"unsupported address width {addr_width}")
        self.addr_width = addr_width
        mask = (1 << addr_width) - 1
        clean: dict[int, int] = {}
        for a, b in (data or {}).items():
            if not 0 <= b < 256:
                raise ValueError(f"byte value {b} out of range")
            if b:
                clean[a & mask] = b
        self.data = clean
        self._hash = None

    @classmethod
    def _raw(cls, addr_width: int, data: dict[int, int]) -> Memory:
        m = object.__new__(cls)
        m.addr_width = addr_width
        m.data = data
        m._hash = None
        return m

    @property
    def type(self) -> BType:
        return BType("mem", self.addr_width)

    def byte(self, addr: int) -> int:
        return self.data.get(addr & ((1 << self.addr_width) - 1), 0)

    def load(self, addr: int, nbytes: int) -> int:
        """Little-endian read of ``nbytes`` starting at ``addr`` (addresses wrap)."""
        mask = (1 << self.addr_width) - 1
        get = self.data.get
        value = 0
        for i in range(nbytes):
            value |= get((addr + i) & mask, 0) << (8 * i)
        return value

    def store(self, addr: int, nbytes: int, value: int) -> Memory:
        mask = (1 << self.addr_width) - 1
        data = dict(self.data)
        for i in range(nbytes):
            b = (value >> (8 * i)) & 0xFF
            a = (addr + i) & mask
            if b:
                data[a] = b
            else:
                data.pop(a, None)
        return Memory._raw(self.addr_width, data)

    def store_bytes(self, addr: int, payload: bytes) -> Memory:
        mask = (1 << self.addr_width) - 1
        data = dict(self.data)
        for i, b in enumerate(payload):
            a = (addr + i) & mask
            if b:
                data[a] = b
            else:
                data.pop(a, None)
        return Memory._raw(self.addr_width, data)

    def __eq__(self, other: object) -> bool:
        if type(other) is not Memory:
            return NotImplemented
        return self.addr_width == other.addr_width and self.data == other.data

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.addr_width, frozenset(self.data.items())))
        return self._hash

    def __repr__(self) -> str:
        items = ", ".join(f"{a:#x}: {b:#04x}" for a, b in sorted(self.data.items()))
        return f"Memory({self.addr_width}, {{{items}}})"


BValue = Union[Word, Memory, str]
Label = Union[int, str]
Env = dict[str, BValue]


def type_of_value(v: BValue) -> BType:
    if type(v) is Word:
        return BType("reg", v.width)
    if type(v) is Memory:
        return BType("mem", v.addr_width)
    if isinstance(v, str):
        return LABEL
    raise TypeError(f"not a BIR value: {v!r}")


# --------------------------------------------------------------------------
# Operators


class UnOpKind(enum.IntEnum):
    NOT = 0
    NEG = 1
    ZEXT = 2
    SEXT = 3
    TRUNC = 4

    @property
    def is_cast(self) -> bool:
        return self >= UnOpKind.ZEXT


class BinOpKind(enum.IntEnum):
    ADD = 0
    SUB = 1
    MUL = 2
    AND = 3
    OR = 4
    XOR = 5
    SHL = 6
    LSHR = 7
    ASHR = 8
    EQ = 9
    ULT = 10
    SLT = 11
    LAND = 12
    LOR = 13
    IMPLIES = 14

    @property
    def is_arith(self) -> bool:
        return self <= BinOpKind.ASHR

    @property
    def is_compare(self) -> bool:
        return BinOpKind.EQ <= self <= BinOpKind.SLT

    @property
    def is_bool(self) -> bool:
        return self >= BinOpKind.LAND


UNOP_NAMES = {k: k.name.lower() for k in UnOpKind}
BINOP_NAMES = {k: k.name.lower() for k in BinOpKind}


# --------------------------------------------------------------------------
# Expressions

T_CONST, T_LABEL, T_VAR, T_ITE, T_UNOP, T_BINOP, T_LOAD, T_STORE, T_SUBST = range(9)


class Expr:
    __slots__ = ()
    tag: ClassVar[int]

    def children(self) -> tuple[Expr, ...]:
        raise NotImplementedError

    def __str__(self) -> str:
        from .sexpr import print_expr

        return print_expr(self)


@dataclass(frozen=True, slots=True, repr=False)
class Const(Expr):
    width: int
    bits: int
    tag: ClassVar[int] = T_CONST

    def __post_init__(self) -> None:
        if self.width not in WORD_WIDTHS:
            raise ValueError(f"unsupported word width {self.width}")
        if not 0 <= self.bits < (1 << self.width):
            raise ValueError(f"{self.bits:#x} does not fit in {self.width} bits")

    @classmethod
    def of(cls, width: int, value: int) -> Const:
        return cls(width, value & ((1 << width) - 1))

    def children(self) -> tuple[Expr, ...]:
        return ()

    def __repr__(self) -> str:
        return f"Const({self.width}, {self.bits:#x})"


@dataclass(frozen=True, slots=True)
class LabelConst(Expr):
    name: str
    tag: ClassVar[int] = T_LABEL

    def children(self) -> tuple[Expr, ...]:
        return ()


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str
    tag: ClassVar[int] = T_VAR

    def children(self) -> tuple[Expr, ...]:
        return ()


@dataclass(frozen=True, slots=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    tag: ClassVar[int] = T_ITE

    def children(self) -> tuple[Expr, ...]:
        return (self.cond, self.then, self.else_)


@dataclass(frozen=True, slots=True)
class UnOp(Expr):
    op: UnOpKind
    arg: Expr
    width: int = 0  # target width, casts only
    tag: ClassVar[int] = T_UNOP

    def __post_init__(self) -> None:
        if self.op.is_cast and self.width not in WORD_WIDTHS:
            raise ValueError(f"cast target width {self.width} unsupported")

    def children(self) -> tuple[Expr, ...]:
        return (self.arg,)


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: BinOpKind
    left: Expr
    right: Expr
    tag: ClassVar[int] = T_BINOP

    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)


@dataclass(frozen=True, slots=True)
class Load(Expr):
    mem: Expr
    addr: Expr
    width: int
    tag: ClassVar[int] = T_LOAD

    def __post_init__(self) -> None:
        if self.width not in ACCESS_WIDTHS:
            raise ValueError(f"load width {self.width} unsupported")

    def children(self) -> tuple[Expr, ...]:
        return (self.mem, self.addr)


@dataclass(frozen=True, slots=True)
class Store(Expr):
    mem: Expr
    addr: Expr
    value: Expr
    width: int
    tag: ClassVar[int] = T_STORE

    def __post_init__(self) -> None:
        if self.width not in ACCESS_WIDTHS:
            raise ValueError(f"store width {self.width} unsupported")

    def children(self) -> tuple[Expr, ...]:
        return (self.mem, self.addr, self.value)


@dataclass(frozen=True, slots=True)
class Subst(Expr):
    """Explicit substitution ``{replacement/var} body``; ``var`` is bound in ``body``."""

    replacement: Expr
    var: str
    body: Expr
    tag: ClassVar[int] = T_SUBST

    def children(self) -> tuple[Expr, ...]:
        return (self.replacement, self.body)


# Small constructors used all over the place.

def c(width: int, value: int) -> Const:
    return Const.of(width, value)


TRUE_E = Const(1, 1)
FALSE_E = Const(1, 0)


def binop(op: BinOpKind, a: Expr, b: Expr) -> BinOp:
    return BinOp(op, a, b)


def land(a: Expr, b: Expr) -> Expr:
    return BinOp(BinOpKind.LAND, a, b)


def lor(a: Expr, b: Expr) -> Expr:
    return BinOp(BinOpKind.LOR, a, b)


def implies(a: Expr, b: Expr) -> Expr:
    return BinOp(BinOpKind.IMPLIES, a, b)


def eq(a: Expr, b: Expr) -> Expr:
    return BinOp(BinOpKind.EQ, a, b)


def lnot(a: Expr) -> Expr:
    return UnOp(UnOpKind.NOT, a)


def conj(parts) -> Expr:
    parts = list(parts)
    if not parts:
        return TRUE_E
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = land(p, out)
    return out


# --------------------------------------------------------------------------
# Statements, blocks, programs


@dataclass(frozen=True, slots=True)
class Assign:
    var: str
    expr: Expr


@dataclass(frozen=True, slots=True)
class Assert:
    cond: Expr


Stmt = Union[Assign, Assert]


@dataclass(frozen=True, slots=True)
class Jmp:
    target: Expr


@dataclass(frozen=True, slots=True)
class CJmp:
    cond: Expr
    then_target: Expr
    else_target: Expr


CfStmt = Union[Jmp, CJmp]


@dataclass(frozen=True, slots=True)
class Block:
    label: Label
    stmts: tuple[Stmt, ...]
    cf: CfStmt

    def __post_init__(self) -> None:
        if not isinstance(self.stmts, tuple):
            object.__setattr__(self, "stmts", tuple(self.stmts))
        if isinstance(self.label, bool) or not isinstance(self.label, (int, str)):
            raise TypeError(f"block label must be int or str, got {self.label!r}")
        if isinstance(self.label, int) and not 0 <= self.label < (1 << 64):
            raise ValueError(f"integer label {self.label:#x} is not a 64-bit word")


class DuplicateLabelError(ValueError):
    pass


@dataclass(frozen=True)
class Program:
    """An ordered list of blocks with unique labels."""

    blocks: tuple[Block, ...]
    index: dict[Label, Block] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.blocks, tuple):
            object.__setattr__(self, "blocks", tuple(self.blocks))
        index: dict[Label, Block] = {}
        for b in self.blocks:
            if b.label in index:
                raise DuplicateLabelError(f"duplicate block label {label_str(b.label)}")
            index[b.label] = b
        object.__setattr__(self, "index", index)

    def __getitem__(self, label: Label) -> Block:
        return self.index[label]

    def __contains__(self, label: object) -> bool:
        return label in self.index

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def labels(self) -> list[Label]:
        return [b.label for b in self.blocks]

    def extended(self, extra) -> Program:
        return Program(self.blocks + tuple(extra))


def label_str(label: Label) -> str:
    return f"{label:#x}" if isinstance(label, int) else repr(label)


def label_key(label: Label) -> tuple[int, int | str]:
    """Total order on labels: integers first, then strings."""
    return (0, label) if isinstance(label, int) else (1, label)
