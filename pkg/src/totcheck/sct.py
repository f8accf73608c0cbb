"""Weights and approximated argument terms for the size-change analysis.

A weight is either Daimon (no information survives) or a finite map from
priorities to integers extended with +infinity.  Approximated terms describe
how a call's argument is built from the caller's parameters: constructor and
record layers above chains of destructor/inverse-constructor steps, weighted
products when precision has been given up, ERR for impossible branches and a
Daimon leaf for values nothing is known about.

All terms here are immutable and hashable; `reduce` brings any raw mixture
(including explicit projections, inverses and weight applications) to the
canonical normal form the rest of the pipeline works with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Union

INF = math.inf


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Weight:
    """entries=None means Daimon; otherwise a sorted (priority, value) map."""

    entries: Optional[tuple[tuple[int, float], ...]] = ()

    @property
    def daimon(self) -> bool:
        return self.entries is None

    @staticmethod
    def of(m: dict[int, float]) -> "Weight":
        return Weight(tuple(sorted(m.items())))

    def get(self, p: int) -> Optional[float]:
        if self.entries is None:
            return None
        for q, v in self.entries:
            if q == p:
                return v
        return None

    def support(self) -> set[int]:
        return set() if self.entries is None else {q for q, _ in self.entries}

    def __str__(self) -> str:
        if self.entries is None:
            return "<T>"
        parts = []
        for i, (q, v) in enumerate(self.entries):
            s = "inf" if v == INF else str(int(v))
            if i > 0 and not s.startswith("-"):
                s = "+" + s
            parts.append(f"{s}@{q}")
        return "<" + ",".join(parts) + ">"


DAIMON = Weight(None)
IDENTITY = Weight(())


def kappa(p: int) -> Weight:
    return Weight(((p, 1),))


def neg_kappa(p: int) -> Weight:
    return Weight(((p, -1),))


def weight_add(a: Weight, b: Weight) -> Weight:
    if a.entries is None or b.entries is None:
        return DAIMON
    m = dict(a.entries)
    for q, v in b.entries:
        m[q] = m.get(q, 0) + v
    return Weight.of(m)


def weight_leq(a: Weight, b: Weight) -> bool:
    """a is below b: a claims no more than b does about every priority."""
    if a.entries is None:
        return True
    if b.entries is None:
        return False
    am = dict(a.entries)
    return all(q in am and am[q] >= v for q, v in b.entries)


def collapse_weight(w: Weight, B: int) -> Weight:
    """Clamp every entry into [-B, B) with B and above going to infinity."""
    if w.entries is None:
        return w
    out = []
    for q, v in w.entries:
        if v < -B:
            v = -B
        elif v >= B:
            v = INF
        out.append((q, v))
    return Weight(tuple(out))


def _weight_key(w: Weight):
    if w.entries is None:
        return (0,)
    return (1, w.entries)


# ---------------------------------------------------------------------------
# approximated terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Err:
    """The impossible value: a clash between a pattern and an argument."""

    def __str__(self) -> str:
        return "!"


@dataclass(frozen=True)
class Unknown:
    """Daimon leaf: a value about which nothing is known."""

    def __str__(self) -> str:
        return "T"


@dataclass(frozen=True)
class Step:
    kind: str  # "proj" | "inv"
    label: str
    prio: int

    def __str__(self) -> str:
        if self.kind == "proj":
            return f".{self.label}^{self.prio}"
        return f"{self.label}^{self.prio}-"


@dataclass(frozen=True)
class Chain:
    """Destructor/inverse steps applied to a parameter, outermost first."""

    steps: tuple[Step, ...]
    base: str

    def __str__(self) -> str:
        if not self.steps:
            return self.base
        return " ".join(str(s) for s in self.steps) + " " + self.base


@dataclass(frozen=True)
class Ctor:
    label: str
    prio: int
    arg: "Term"

    def __str__(self) -> str:
        return f"{self.label}^{self.prio} {_atom(self.arg)}"


@dataclass(frozen=True)
class Rec:
    fields: tuple[tuple[str, "Term"], ...]
    prio: int

    def __str__(self) -> str:
        inner = "; ".join(f"{lab}={t}" for lab, t in self.fields)
        return "{" + inner + "}" + f"^{self.prio}"


@dataclass(frozen=True)
class Product:
    """Weighted factors; a value's branches must each fit some factor."""

    factors: tuple[tuple[Weight, "Term"], ...]

    def __str__(self) -> str:
        return " * ".join(f"{w} {_atom(t)}" for w, t in self.factors)


# raw (reducible) forms


@dataclass(frozen=True)
class Proj:
    label: str
    prio: int
    arg: "Term"

    def __str__(self) -> str:
        return f".{self.label}^{self.prio} {_atom(self.arg)}"


@dataclass(frozen=True)
class CtorInv:
    label: str
    prio: int
    arg: "Term"

    def __str__(self) -> str:
        return f"{self.label}^{self.prio}- {_atom(self.arg)}"


@dataclass(frozen=True)
class WApp:
    weight: Weight
    arg: "Term"

    def __str__(self) -> str:
        return f"{self.weight} {_atom(self.arg)}"


Term = Union[Err, Unknown, Chain, Ctor, Rec, Product, Proj, CtorInv, WApp]

ERR = Err()
UNKNOWN = Unknown()


def _atom(t: Term) -> str:
    s = str(t)
    if isinstance(t, (Err, Unknown, Rec)) or (isinstance(t, Chain) and not t.steps):
        return s
    return f"({s})"


def term_key(t: Term):
    """Total deterministic order over terms, for canonical product sorting."""
    if isinstance(t, Err):
        return (0,)
    if isinstance(t, Unknown):
        return (1,)
    if isinstance(t, Chain):
        return (2, tuple((s.kind, s.label, s.prio) for s in t.steps), t.base)
    if isinstance(t, Rec):
        return (3, t.prio, tuple((lab, term_key(u)) for lab, u in t.fields))
    if isinstance(t, Ctor):
        return (4, t.label, t.prio, term_key(t.arg))
    if isinstance(t, Product):
        return (5, tuple((_weight_key(w), term_key(u)) for w, u in t.factors))
    if isinstance(t, Proj):
        return (6, t.label, t.prio, term_key(t.arg))
    if isinstance(t, CtorInv):
        return (7, t.label, t.prio, term_key(t.arg))
    return (8, _weight_key(t.weight), term_key(t.arg))


# ---------------------------------------------------------------------------
# reduction to normal form
# ---------------------------------------------------------------------------


def _normalize_product(pairs: Iterable[tuple[Weight, Term]]) -> Term:
    """Flatten weighted factors: absorb constructor/record layers (paying
    kappa per layer), merge nested products pointwise, drop ERR factors."""
    out: list[tuple[Weight, Term]] = []
    vacuous = False
    work = list(pairs)
    while work:
        w, t = work.pop()
        if isinstance(t, Err):
            continue
        if w.daimon or isinstance(t, Unknown):
            # a factor that claims nothing; it cannot carry the product alone
            vacuous = True
            continue
        if isinstance(t, Ctor):
            work.append((weight_add(w, kappa(t.prio)), t.arg))
        elif isinstance(t, Rec) and t.fields:
            for _, u in t.fields:
                work.append((weight_add(w, kappa(t.prio)), u))
        elif isinstance(t, Product):
            for wi, ti in t.factors:
                work.append((weight_add(w, wi), ti))
        else:  # Chain or empty Rec
            out.append((w, t))
    if not out:
        return UNKNOWN if vacuous else ERR
    uniq = sorted(set(out), key=lambda f: (_weight_key(f[0]), term_key(f[1])))
    return Product(tuple(uniq))


def _apply_proj(label: str, prio: int, t: Term) -> Term:
    if isinstance(t, (Err, Unknown)):
        return t
    if isinstance(t, Rec):
        for lab, u in t.fields:
            if lab == label:
                return u
        return ERR
    if isinstance(t, Ctor):
        return ERR
    if isinstance(t, Chain):
        return Chain((Step("proj", label, prio),) + t.steps, t.base)
    if isinstance(t, Product):
        return _normalize_product((weight_add(w, neg_kappa(prio)), u) for w, u in t.factors)
    raise ValueError(f"projection applied to unreduced term {t!r}")


def _apply_inv(label: str, prio: int, t: Term) -> Term:
    if isinstance(t, (Err, Unknown)):
        return t
    if isinstance(t, Ctor):
        return t.arg if t.label == label else ERR
    if isinstance(t, Rec):
        return ERR
    if isinstance(t, Chain):
        return Chain((Step("inv", label, prio),) + t.steps, t.base)
    if isinstance(t, Product):
        return _normalize_product((weight_add(w, neg_kappa(prio)), u) for w, u in t.factors)
    raise ValueError(f"constructor inverse applied to unreduced term {t!r}")


def reduce(t: Term) -> Term:
    """Normal form: ERR propagated, clashes resolved, weights absorbed."""
    if isinstance(t, (Err, Unknown, Chain)):
        return t
    if isinstance(t, Ctor):
        a = reduce(t.arg)
        return ERR if isinstance(a, Err) else Ctor(t.label, t.prio, a)
    if isinstance(t, Rec):
        fields = []
        for lab, u in t.fields:
            v = reduce(u)
            if isinstance(v, Err):
                return ERR
            fields.append((lab, v))
        return Rec(tuple(sorted(fields)), t.prio)
    if isinstance(t, Product):
        return _normalize_product((w, reduce(u)) for w, u in t.factors)
    if isinstance(t, WApp):
        return _normalize_product([(t.weight, reduce(t.arg))])
    if isinstance(t, Proj):
        return _apply_proj(t.label, t.prio, reduce(t.arg))
    if isinstance(t, CtorInv):
        return _apply_inv(t.label, t.prio, reduce(t.arg))
    raise ValueError(f"not a term: {t!r}")


def priorities_in(t: Term) -> set[int]:
    if isinstance(t, (Err, Unknown)):
        return set()
    if isinstance(t, Chain):
        return {s.prio for s in t.steps}
    if isinstance(t, Ctor):
        return {t.prio} | priorities_in(t.arg)
    if isinstance(t, Rec):
        out = {t.prio}
        for _, u in t.fields:
            out |= priorities_in(u)
        return out
    if isinstance(t, Product):
        out: set[int] = set()
        for w, u in t.factors:
            out |= w.support() | priorities_in(u)
        return out
    if isinstance(t, WApp):
        return t.weight.support() | priorities_in(t.arg)
    return {t.prio} | priorities_in(t.arg)  # Proj / CtorInv


# ---------------------------------------------------------------------------
# order and coherence
# ---------------------------------------------------------------------------


def _as_factors(t: Term) -> Optional[tuple[tuple[Weight, Term], ...]]:
    """View a leaf-zone term as weighted factors (bare leaves count as <>)."""
    if isinstance(t, Product):
        return t.factors
    if isinstance(t, Chain) or (isinstance(t, Rec) and not t.fields):
        return ((IDENTITY, t),)
    return None


def _factor_covers(u_f: tuple[Weight, Term], v_f: tuple[Weight, Term]) -> bool:
    wu, lu = u_f
    wv, lv = v_f
    if isinstance(lv, Chain) and isinstance(lu, Chain):
        if lu.base != lv.base or len(lu.steps) > len(lv.steps):
            return False
        k = len(lv.steps) - len(lu.steps)
        if lv.steps[k:] != lu.steps:
            return False
        target = wv
        for s in lv.steps[:k]:  # absorbed outer steps
            target = weight_add(target, neg_kappa(s.prio))
        return weight_leq(wu, target)
    if isinstance(lv, Rec) and isinstance(lu, Rec):
        return lu == lv and weight_leq(wu, wv)
    return False


def term_leq(u: Term, v: Term) -> bool:
    """Sound under-approximation of the generated approximation order."""
    return _leq(reduce(u), reduce(v))


def _leq(u: Term, v: Term) -> bool:
    if isinstance(v, Err):
        return True
    if isinstance(u, Err):
        return False
    if isinstance(u, Unknown):
        return True
    if isinstance(v, Unknown):
        return False
    if isinstance(u, Ctor) and isinstance(v, Ctor):
        return u.label == v.label and u.prio == v.prio and _leq(u.arg, v.arg)
    if isinstance(u, Rec) and isinstance(v, Rec) and u.fields and v.fields:
        if u.prio != v.prio or [l for l, _ in u.fields] != [l for l, _ in v.fields]:
            return False
        return all(_leq(a, b) for (_, a), (_, b) in zip(u.fields, v.fields))
    if isinstance(u, Product) and isinstance(v, (Ctor, Rec)) and not (
        isinstance(v, Rec) and not v.fields
    ):
        # compare against <> applied to v, which absorbs v's structure
        return _leq(u, _normalize_product([(IDENTITY, v)]))
    if not isinstance(u, Product):
        # a bare chain or empty record is exact; it sits strictly above
        # every weighted product, so only its own reflexive pair holds
        return u == v
    vf = _as_factors(v)
    if vf is None:
        return False
    return all(any(_factor_covers(f, g) for f in u.factors) for g in vf)


def coherent(u: Term, v: Term) -> bool:
    """Over-approximation of "u and v admit a common refinement"."""
    return _coh(reduce(u), reduce(v))


def _coh(u: Term, v: Term) -> bool:
    if isinstance(u, Err) or isinstance(v, Err):
        return False
    if isinstance(u, Unknown) or isinstance(v, Unknown):
        return True
    if isinstance(u, Product) or isinstance(v, Product):
        return True
    if isinstance(u, Ctor) and isinstance(v, Ctor):
        return u.label == v.label and u.prio == v.prio and _coh(u.arg, v.arg)
    if isinstance(u, Rec) and isinstance(v, Rec):
        if u.prio != v.prio or [l for l, _ in u.fields] != [l for l, _ in v.fields]:
            return False
        return all(_coh(a, b) for (_, a), (_, b) in zip(u.fields, v.fields))
    if isinstance(u, Chain) and isinstance(v, Chain):
        return u == v
    # a chain can refine into a constructor through an inverse: the bound
    # C (C- delta x) reduces to the chain and is congruent to the constructor
    if isinstance(u, Chain) and isinstance(v, Ctor):
        return _coh(Chain((Step("inv", v.label, v.prio),) + u.steps, u.base), v.arg)
    if isinstance(u, Ctor) and isinstance(v, Chain):
        return _coh(v, u)
    return False


# ---------------------------------------------------------------------------
# collapsing
# ---------------------------------------------------------------------------


def term_collapse_weights(t: Term, B: int) -> Term:
    if isinstance(t, (Err, Unknown, Chain)):
        return t
    if isinstance(t, Ctor):
        return Ctor(t.label, t.prio, term_collapse_weights(t.arg, B))
    if isinstance(t, Rec):
        return Rec(tuple((lab, term_collapse_weights(u, B)) for lab, u in t.fields), t.prio)
    if isinstance(t, Product):
        return _normalize_product((collapse_weight(w, B), u) for w, u in t.factors)
    raise ValueError(f"cannot collapse weights of unreduced term {t!r}")


def collapse_depth(t: Term, D: int, priorities: Optional[Iterable[int]] = None) -> Term:
    """Keep constructor/record structure to depth D and at most D innermost
    chain steps; everything beyond is absorbed into weights (seeded with
    explicit zeros at every local priority)."""
    t = reduce(t)
    prios = set(priorities) if priorities is not None else priorities_in(t)
    zeros = Weight(tuple((p, 0) for p in sorted(prios)))

    def cut_factor(w: Weight, leaf: Term) -> tuple[Weight, Term]:
        if isinstance(leaf, Chain) and len(leaf.steps) > D:
            k = len(leaf.steps) - D
            for s in leaf.steps[:k]:
                w = weight_add(w, neg_kappa(s.prio))
            w = weight_add(w, zeros)
            leaf = Chain(leaf.steps[k:], leaf.base)
        return (w, leaf)

    def cut_product(t: Term) -> Term:
        if isinstance(t, Product):
            return _normalize_product(cut_factor(w, leaf) for w, leaf in t.factors)
        return t

    def zero_cut(t: Term) -> Term:
        return cut_product(_normalize_product([(zeros, t)]))

    def go(t: Term, i: int) -> Term:
        if isinstance(t, (Err, Unknown)):
            return t
        if i == 0:
            return zero_cut(t)
        if isinstance(t, Ctor):
            return Ctor(t.label, t.prio, go(t.arg, i - 1))
        if isinstance(t, Rec):
            if not t.fields:
                return t
            return Rec(tuple((lab, go(u, i - 1)) for lab, u in t.fields), t.prio)
        if isinstance(t, Chain):
            if len(t.steps) <= D:
                return t
            return _normalize_product([cut_factor(zeros, t)])
        return cut_product(t)  # Product

    return go(t, D)


# ---------------------------------------------------------------------------
# branches and norms
# ---------------------------------------------------------------------------

Branch = tuple[tuple, ...]


def branches(t: Term) -> list[Branch]:
    """All root-to-leaf paths of a normal term."""
    if isinstance(t, Err):
        return [(("end-err",),)]
    if isinstance(t, Unknown):
        return [(("end-daimon",),)]
    if isinstance(t, Chain):
        steps = tuple((s.kind, s.label, s.prio) for s in t.steps)
        return [steps + (("end-var", t.base),)]
    if isinstance(t, Ctor):
        return [(("ctor", t.label, t.prio),) + b for b in branches(t.arg)]
    if isinstance(t, Rec):
        if not t.fields:
            return [(("end-empty", t.prio),)]
        out = []
        for lab, u in t.fields:
            out.extend((("rec", lab, t.prio),) + b for b in branches(u))
        return out
    if isinstance(t, Product):
        out = []
        for w, leaf in t.factors:
            for b in branches(leaf):
                out.append((("weight", w),) + b)
        return out
    raise ValueError(f"branches of unreduced term {t!r}")


def branch_norm(b: Branch, p: int) -> float:
    """Net number of priority-p constructors along the branch (upper bound)."""
    total: float = 0
    for step in b:
        kind = step[0]
        if kind in ("ctor", "rec", "end-empty"):
            if step[-1] == p:
                total += 1
        elif kind in ("proj", "inv"):
            if step[2] == p:
                total -= 1
        elif kind == "weight":
            w: Weight = step[1]
            if w.daimon:
                return INF
            v = w.get(p)
            if v is not None:
                total += v
        elif kind == "end-daimon":
            return INF
    return total
