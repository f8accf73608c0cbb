"""The weighted call graph and the size-change totality criterion.

Each recursive call inside a definition group becomes an edge carrying (a)
the weight of the constructors the call sits under in its right-hand side
and (b) an approximation of every argument in terms of the caller's
parameters (x1, x2, ...).  Edges compose by substitution; collapsing keeps
the transitive closure finite.  A group is declared TOTAL when every
coherent idempotent self-loop of the closure decreases, either in its
output weight (highest priority even and negative) or in one of its
arguments (highest priority odd with negative net depth).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from . import surface
from .sct import (
    Chain,
    Ctor,
    DAIMON,
    Err,
    IDENTITY,
    Product,
    Proj,
    CtorInv,
    Rec,
    Step,
    Term,
    UNKNOWN,
    Weight,
    coherent,
    collapse_depth,
    collapse_weight,
    neg_kappa,
    reduce,
    term_collapse_weights,
    weight_add,
)


class ResourceError(Exception):
    """The transitive closure outgrew the configured edge budget."""


@dataclass(frozen=True)
class Call:
    source: str
    target: str
    out_weight: Weight
    args: tuple[Term, ...]


def format_call(c: Call) -> str:
    args = ", ".join(str(a) for a in c.args)
    return f"{c.source} -> {c.out_weight} {c.target} ({args})"


def is_dropped(c: Call) -> bool:
    return any(isinstance(a, Err) for a in c.args)


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


def pattern_substitution(patterns) -> dict[str, Term]:
    """Each pattern variable as a destructor/inverse chain over x1..xn."""
    sub: dict[str, Term] = {}

    def walk(p, steps: tuple[Step, ...], base: str):
        if isinstance(p, surface.PVar):
            sub[p.name] = Chain(steps, base)
        elif isinstance(p, surface.PCtor):
            walk(p.arg, (Step("inv", p.label, p.prio),) + steps, base)
        elif isinstance(p, surface.PRec):
            for lab, q in p.fields:
                walk(q, (Step("proj", lab, p.prio),) + steps, base)
        else:
            raise ValueError(f"unstamped pattern {p!r}")

    for i, p in enumerate(patterns):
        walk(p, (), f"x{i + 1}")
    return sub


def approx_term(t, sub: dict[str, Term]) -> Term:
    """Approximate a right-hand-side term over the caller's parameters.
    Function applications are opaque: nothing is known about their value."""
    if isinstance(t, surface.Var):
        return sub[t.name]
    if isinstance(t, surface.Ctor):
        return Ctor(t.label, t.prio, approx_term(t.arg, sub))
    if isinstance(t, surface.Rec):
        return Rec(tuple((lab, approx_term(u, sub)) for lab, u in t.fields), t.prio)
    return UNKNOWN  # App, Fun, CtorVal


def extract_calls(group: surface.DefGroup) -> list[Call]:
    """All calls between members of the group, one per occurrence."""
    members = {f: len(group.clauses_of(f)[0].patterns) for f in group.functions}
    calls: list[Call] = []
    for clause in group.clauses:
        sub = pattern_substitution(clause.patterns)

        def walk(t, w: Weight):
            head, args = surface.spine(t)
            if (
                isinstance(head, surface.Fun)
                and head.name in members
                and len(args) == members[head.name]
            ):
                approxed = tuple(reduce(approx_term(a, sub)) for a in args)
                c = Call(clause.name, head.name, w, approxed)
                if not is_dropped(c):
                    calls.append(c)
                for a in args:
                    walk(a, DAIMON)
                return
            if isinstance(head, surface.Ctor):
                walk(head.arg, weight_add(w, neg_kappa(head.prio)) if not args else DAIMON)
            elif isinstance(head, surface.Rec):
                for _, u in head.fields:
                    walk(u, weight_add(w, neg_kappa(head.prio)) if not args else DAIMON)
            for a in args:
                walk(a, DAIMON)

        walk(clause.body, IDENTITY)
    return calls


# ---------------------------------------------------------------------------
# composition and closure
# ---------------------------------------------------------------------------


def subst_term(t: Term, mapping: dict[str, Term]) -> Term:
    if isinstance(t, Chain):
        out = mapping[t.base]
        for s in reversed(t.steps):
            out = Proj(s.label, s.prio, out) if s.kind == "proj" else CtorInv(s.label, s.prio, out)
        return out
    if isinstance(t, Ctor):
        return Ctor(t.label, t.prio, subst_term(t.arg, mapping))
    if isinstance(t, Rec):
        return Rec(tuple((lab, subst_term(u, mapping)) for lab, u in t.fields), t.prio)
    if isinstance(t, Product):
        return Product(tuple((w, subst_term(leaf, mapping)) for w, leaf in t.factors))
    return t  # Err, Unknown


def compose(a: Call, b: Call) -> Call:
    """The call 'a then b', with b's arguments rewritten over a's caller."""
    assert a.target == b.source, "calls do not meet"
    mapping = {f"x{i + 1}": arg for i, arg in enumerate(a.args)}
    args = tuple(reduce(subst_term(t, mapping)) for t in b.args)
    return Call(a.source, b.target, weight_add(a.out_weight, b.out_weight), args)


def collapsed_compose(a: Call, b: Call, B: int, D: int, priorities: Iterable[int]) -> Call:
    c = compose(a, b)
    prios = set(priorities)
    args = tuple(
        reduce(term_collapse_weights(collapse_depth(t, D, prios), B)) for t in c.args
    )
    return Call(c.source, c.target, collapse_weight(c.out_weight, B), args)


def transitive_closure(
    calls: Iterable[Call],
    B: int,
    D: int,
    priorities: Iterable[int],
    max_edges: int = 100000,
) -> set[Call]:
    prios = set(priorities)
    edges: set[Call] = set()
    work: list[Call] = []

    def add(c: Call):
        if is_dropped(c) or c in edges:
            return
        edges.add(c)
        work.append(c)
        if len(edges) > max_edges:
            raise ResourceError(f"call graph closure exceeded {max_edges} edges")

    for c in calls:
        add(c)
    while work:
        c = work.pop()
        for d in list(edges):
            if c.target == d.source:
                add(collapsed_compose(c, d, B, D, prios))
            if d.target == c.source and d != c:
                add(collapsed_compose(d, c, B, D, prios))
    return edges


# ---------------------------------------------------------------------------
# the size-change condition
# ---------------------------------------------------------------------------


def _cond_output(c: Call) -> bool:
    w = c.out_weight
    if w.entries is None or not w.entries:
        return False
    p = max(q for q, _ in w.entries)
    return p % 2 == 0 and w.get(p) < 0


def _candidate_products(t: Term, beta: tuple = ()):
    if isinstance(t, Ctor):
        yield from _candidate_products(t.arg, beta + ((t.label, t.prio),))
    elif isinstance(t, Rec):
        for lab, u in t.fields:
            yield from _candidate_products(u, beta + ((lab, t.prio),))
    elif isinstance(t, Product):
        yield beta, t.factors
    elif isinstance(t, Chain):
        yield beta, ((IDENTITY, t),)


def _factor_decreases(beta: tuple, w: Weight, leaf: Term, base: str) -> bool:
    if not isinstance(leaf, Chain) or leaf.base != base or w.daimon:
        return False
    prios = {q for _, q in beta} | w.support() | {s.prio for s in leaf.steps}
    if not prios:
        return False
    p = max(prios)
    if p % 2 == 0:
        return False
    total = sum(1 for _, q in beta if q == p) - sum(1 for s in leaf.steps if s.prio == p)
    v = w.get(p)
    if v is not None:
        total += v
    return total < 0


def _cond_argument(c: Call) -> bool:
    for i, arg in enumerate(c.args):
        base = f"x{i + 1}"
        for beta, factors in _candidate_products(arg):
            if factors and all(_factor_decreases(beta, w, leaf, base) for w, leaf in factors):
                return True
    return False


def check_loop(c: Call) -> bool:
    """Does this self-loop witness a decrease?"""
    return _cond_output(c) or _cond_argument(c)


@dataclass
class GroupAnalysis:
    functions: tuple[str, ...]
    verdict: str  # "TOTAL" | "UNSAFE"
    reason: Optional[str]
    evidence: Optional[Call]
    calls: list[Call]
    closure: set[Call]


def analyze_group(
    group: surface.DefGroup,
    priorities: Iterable[int],
    B: int = 2,
    D: int = 2,
    max_edges: int = 100000,
) -> GroupAnalysis:
    prios = set(priorities)
    calls = extract_calls(group)
    closure = transitive_closure(calls, B, D, prios, max_edges)
    for c in sorted(closure, key=format_call):
        if c.source != c.target:
            continue
        sq = collapsed_compose(c, c, B, D, prios)
        if is_dropped(sq):
            continue
        if not all(coherent(x, y) for x, y in zip(c.args, sq.args)):
            continue
        if not check_loop(c):
            return GroupAnalysis(
                group.functions,
                "UNSAFE",
                f"no decrease on the idempotent loop {format_call(c)}",
                c,
                calls,
                closure,
            )
    return GroupAnalysis(group.functions, "TOTAL", None, None, calls, closure)
