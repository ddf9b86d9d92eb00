"""Control-flow graphs and weakest preconditions for loop-free BIR fragments.

A predicate map (``PredMap``) sends labels to Reg1 expressions.  Starting
from a postcondition map ``q``, ``wp_fragment`` repeatedly picks a block all
of whose successors already have a precondition and computes its own,
until every requested label is covered.  Assignments produce explicit
``Subst`` nodes; nothing is expanded here.
"""

from __future__ import annotations

import itertools
from collections.abc import Collection, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

from .core import eval_expr
from .sem import BirState, weak_exec
from .syntax import (
    DIVERGED,
    TRUE,
    Assert,
    Assign,
    Block,
    Const,
    Expr,
    Jmp,
    Label,
    LabelConst,
    Program,
    Subst,
    implies,
    label_key,
    label_str,
    land,
    lnot,
)

PredMap = dict  # Label -> Expr


class WpError(Exception):
    pass


class CycleError(WpError):
    def __init__(self, cycle: list[Label]) -> None:
        path = " -> ".join(label_str(x) for x in cycle)
        super().__init__(f"fragment not loop-free: cycle {path}")
        self.cycle = cycle


# --------------------------------------------------------------------------
# Control-flow graph


def const_label(e: Expr) -> Label | None:
    """The label a constant jump target denotes, or None for computed targets."""
    if type(e) is Const:
        return e.bits
    if type(e) is LabelConst:
        return e.name
    return None


def successors(block: Block) -> tuple[list[Label], bool]:
    """Constant successor labels and whether some target is computed."""
    cf = block.cf
    targets = (cf.target,) if type(cf) is Jmp else (cf.then_target, cf.else_target)
    out: list[Label] = []
    indirect = False
    for t in targets:
        lab = const_label(t)
        if lab is None:
            indirect = True
        elif lab not in out:
            out.append(lab)
    return out, indirect


@dataclass
class Cfg:
    nodes: list[Label]
    edges: list[tuple[Label, Label]]
    entries: list[Label]
    exits: list[Label]
    unresolved: list[Label]
    succ: dict[Label, list[Label]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        def enc(lab: Label):
            return f"{lab:#x}" if isinstance(lab, int) else lab

        return {
            "nodes": [enc(n) for n in self.nodes],
            "edges": [[enc(a), enc(b)] for a, b in self.edges],
            "entries": [enc(n) for n in self.entries],
            "exits": [enc(n) for n in self.exits],
            "unresolved": [enc(n) for n in self.unresolved],
        }

    def find_cycle(self, within: Collection[Label] | None = None) -> list[Label] | None:
        """A cycle witness ``[a, b, ..., a]`` among ``within`` (default: all nodes)."""
        allowed = set(self.nodes if within is None else within)
        color: dict[Label, int] = {}
        for root in sorted(allowed, key=label_key):
            if color.get(root):
                continue
            stack: list[tuple[Label, Iterator[Label]]] = [(root, iter(self.succ.get(root, ())))]
            path = [root]
            color[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next((s for s in it if s in allowed), None)
                if nxt is None:
                    color[node] = 2
                    stack.pop()
                    path.pop()
                    continue
                if color.get(nxt) == 1:
                    return path[path.index(nxt):] + [nxt]
                if not color.get(nxt):
                    color[nxt] = 1
                    stack.append((nxt, iter(self.succ.get(nxt, ()))))
                    path.append(nxt)
        return None


def build_cfg(p: Program) -> Cfg:
    succ: dict[Label, list[Label]] = {}
    edges: list[tuple[Label, Label]] = []
    unresolved: list[Label] = []
    exits: list[Label] = []
    has_pred: set[Label] = set()
    for b in p.blocks:
        out, indirect = successors(b)
        succ[b.label] = out
        if indirect:
            unresolved.append(b.label)
        for t in out:
            edges.append((b.label, t))
            has_pred.add(t)
            if t not in p.index and t not in exits:
                exits.append(t)
    entries = [b.label for b in p.blocks if b.label not in has_pred]
    exits.sort(key=label_key)
    return Cfg(
        nodes=p.labels + exits,
        edges=edges,
        entries=entries,
        exits=exits,
        unresolved=unresolved,
        succ=succ,
    )


# --------------------------------------------------------------------------
# Weakest preconditions


def wp_stmt(s, q: Expr) -> Expr:
    if type(s) is Assign:
        return Subst(s.expr, s.var, q)
    if type(s) is Assert:
        return land(s.cond, q)
    raise TypeError(f"not a statement: {s!r}")


def _lookup(h: Mapping[Label, Expr], target: Expr) -> Expr:
    lab = const_label(target)
    if lab is None:
        raise WpError(f"cannot propagate through the computed jump target {target}")
    try:
        return h[lab]
    except KeyError:
        raise WpError(f"cannot propagate: no precondition for label {label_str(lab)}") from None


def wp_cf(cf, h: Mapping[Label, Expr]) -> Expr:
    if type(cf) is Jmp:
        return _lookup(h, cf.target)
    h1 = _lookup(h, cf.then_target)
    h2 = _lookup(h, cf.else_target)
    return land(implies(cf.cond, h1), implies(lnot(cf.cond), h2))


def wp_block(block: Block, h: Mapping[Label, Expr]) -> Expr:
    q = wp_cf(block.cf, h)
    for s in reversed(block.stmts):
        q = wp_stmt(s, q)
    return q


@dataclass(frozen=True)
class WpStep:
    selected: Label
    domain: tuple[Label, ...]  # dom(H) after the step
    eligible: tuple[Label, ...]  # labels selectable next


def _relevant(p: Program, cfg: Cfg, q: Mapping[Label, Expr], targets: Collection[Label]) -> list[Label]:
    """Blocks whose precondition is needed: forward closure of targets, stopping at dom(q)."""
    seen: list[Label] = []
    stack = [t for t in targets if t not in q]
    visited = set()
    while stack:
        lab = stack.pop()
        if lab in visited:
            continue
        visited.add(lab)
        if lab not in p.index:
            raise WpError(f"cannot propagate: label {label_str(lab)} is neither a block nor in the postcondition")
        if lab in cfg.unresolved:
            raise WpError(f"cannot propagate: block {label_str(lab)} ends in a computed jump")
        seen.append(lab)
        stack.extend(s for s in cfg.succ[lab] if s not in q)
    return seen


def wp_iterations(
    p: Program, q: Mapping[Label, Expr], targets: Collection[Label]
) -> Iterator[tuple[WpStep, dict[Label, Expr]]]:
    """Yield each selection step together with the current H."""
    cfg = build_cfg(p)
    need = _relevant(p, cfg, q, targets)
    cycle = cfg.find_cycle(need)
    if cycle:
        raise CycleError(cycle)
    h: dict[Label, Expr] = dict(q)
    pending = set(need)

    def eligible() -> list[Label]:
        return sorted((lab for lab in pending if all(s in h for s in cfg.succ[lab])), key=label_key)

    while pending:
        ready = eligible()
        if not ready:  # unreachable after the cycle check
            raise WpError("no block is ready for propagation")
        lab = ready[0]
        h[lab] = wp_block(p[lab], h)
        pending.discard(lab)
        yield WpStep(lab, tuple(sorted(h, key=label_key)), tuple(eligible())), h


def wp_fragment(
    p: Program, q: Mapping[Label, Expr], targets: Collection[Label] | None = None
) -> dict[Label, Expr]:
    """Preconditions for ``targets`` (default: CFG entries) given postconditions ``q``."""
    if targets is None:
        targets = build_cfg(p).entries
    h: dict[Label, Expr] = dict(q)
    for _, h in wp_iterations(p, q, targets):
        pass
    keep = set(targets) | set(q)
    return {lab: h[lab] for lab in sorted(keep, key=label_key)}


# --------------------------------------------------------------------------
# Brute-force triple checking


@dataclass
class TripleResult:
    holds: bool
    counterexample: dict | None = None
    checked: int = 0

    def __bool__(self) -> bool:
        return self.holds


def enumerate_envs(domain: Mapping[str, Sequence]) -> Iterator[dict]:
    names = sorted(domain)
    for combo in itertools.product(*(domain[n] for n in names)):
        yield dict(zip(names, combo))


def check_triple_exhaustive(
    p: Program,
    pre: Mapping[Label, Expr],
    post: Mapping[Label, Expr],
    domain: Mapping[str, Sequence],
    fuel: int = 10_000,
) -> TripleResult:
    """Does {pre} p {post} hold for every environment drawn from ``domain``?

    For each entry label in ``pre`` and each env satisfying it, the weak
    transition to ``dom(post)`` must not fail and must land in a state
    satisfying the corresponding postcondition.  Divergence satisfies the
    triple vacuously.
    """
    exits = frozenset(post)
    n = 0
    for env in enumerate_envs(domain):
        for lab in sorted(pre, key=label_key):
            if eval_expr(pre[lab], env) != TRUE:
                continue
            n += 1
            res = weak_exec(p, BirState(env, lab), exits, fuel)
            if res is DIVERGED:
                continue
            if res.is_error:
                return TripleResult(False, {"entry": lab, "env": env, "outcome": res.pc.name}, n)
            if eval_expr(post[res.pc], res.env) != TRUE:
                return TripleResult(False, {"entry": lab, "env": env, "exit": res.pc, "final": res.env}, n)
    return TripleResult(True, None, n)
