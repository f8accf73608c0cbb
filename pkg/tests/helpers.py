"""Shared plumbing for the test suite.

Corpus loading, the front half of the checking pipeline (parse through
annotation), and seeded random generators for size-change terms, calls
and concrete values.
"""

from __future__ import annotations

import functools
import pathlib
import random

from totcheck import callgraph, games, surface, typesys
from totcheck.sct import (
    DAIMON,
    IDENTITY,
    Chain,
    Ctor,
    CtorInv,
    ERR,
    Product,
    Proj,
    Rec,
    Step,
    UNKNOWN,
    WApp,
    Weight,
    reduce,
)

CORPUS = pathlib.Path(__file__).parent / "corpus"


def corpus_source(name: str) -> str:
    return (CORPUS / f"{name}.ch").read_text()


class Loaded:
    """A corpus program taken through parse, desugar, validation,
    inference and annotation."""

    def __init__(self, src: str):
        self.src = src
        self.program = surface.desugar(surface.parse_program(src))
        self.env = typesys.validate_type_decls(self.program)
        typesys.infer_types(self.program, self.env)
        self.schemes = self.env.sigs
        self.annotated = games.annotate_program(self.program, self.env)

    @property
    def priorities(self) -> dict:
        return {
            surface.format_type(n): p
            for n, p in self.annotated.game.priority.items()
        }

    def group_of(self, fun: str) -> surface.DefGroup:
        for g in self.program.def_groups:
            if fun in g.functions:
                return g
        raise KeyError(fun)

    def finite_priorities(self) -> set[int]:
        return {
            int(p)
            for p in self.annotated.game.priority.values()
            if p != games.INF
        }


@functools.lru_cache(maxsize=None)
def load(name: str) -> Loaded:
    return Loaded(corpus_source(name))


def pipeline(src: str) -> Loaded:
    return Loaded(src)


# ---------------------------------------------------------------------------
# random size-change terms

WEIGHT_POOL = (
    IDENTITY,
    Weight(((0, -1),)),
    Weight(((1, -1),)),
    Weight(((0, -1), (1, -1))),
    Weight(((1, 1),)),
    Weight(((0, 0),)),
    Weight(((2, -2),)),
    DAIMON,
)

STEP_POOL = (
    Step("proj", "A", 0),
    Step("proj", "B", 2),
    Step("inv", "C", 1),
    Step("inv", "K", 1),
)

PRIORITIES = (0, 1, 2)


def random_chain(rng: random.Random, bases=("x1",)) -> Chain:
    steps = tuple(rng.choice(STEP_POOL) for _ in range(rng.randrange(3)))
    return Chain(steps, rng.choice(bases))


def random_term(rng: random.Random, depth: int, bases=("x1",)):
    """A raw (unreduced) size-change term of bounded depth."""
    if depth <= 0:
        return rng.choice(
            (ERR, UNKNOWN, random_chain(rng, bases), Rec((), 0))
        )
    kind = rng.randrange(8)
    if kind == 0:
        return Ctor(rng.choice(("C", "K")), 1, random_term(rng, depth - 1, bases))
    if kind == 1:
        labs = rng.sample(("A", "B", "D"), rng.randrange(3))
        return Rec(
            tuple((lab, random_term(rng, depth - 1, bases)) for lab in sorted(labs)),
            rng.choice((0, 2)),
        )
    if kind == 2:
        return Proj(rng.choice(("A", "B")), rng.choice((0, 2)), random_term(rng, depth - 1, bases))
    if kind == 3:
        return CtorInv(rng.choice(("C", "K")), 1, random_term(rng, depth - 1, bases))
    if kind in (4, 5):
        return WApp(rng.choice(WEIGHT_POOL), random_term(rng, depth - 1, bases))
    if kind == 6:
        factors = tuple(
            (rng.choice(WEIGHT_POOL), random_term(rng, depth - 1, bases))
            for _ in range(rng.randrange(1, 4))
        )
        return Product(factors)
    return random_term(rng, 0, bases)


def random_reduced_term(rng: random.Random, depth: int, bases=("x1",)):
    return reduce(random_term(rng, depth, bases))


def random_weight(rng: random.Random) -> Weight:
    return rng.choice(WEIGHT_POOL)


def random_call(rng: random.Random, source: str, target: str, arity: int = 2) -> callgraph.Call:
    bases = tuple(f"x{i + 1}" for i in range(arity))
    args = tuple(random_reduced_term(rng, 2, bases) for _ in range(arity))
    return callgraph.Call(source, target, random_weight(rng), args)


# ---------------------------------------------------------------------------
# concrete values and patterns for the substitution/matching comparison

VALUE_PRELUDE = """\
codata unit where

data nat where
  | Zero : unit -> nat
  | Succ : nat -> nat

codata prod('x, 'y) where
  | Fst : prod('x, 'y) -> 'x
  | Snd : prod('x, 'y) -> 'y

data list('x) where
  | Nil : unit -> list('x)
  | Cons : prod('x, list('x)) -> list('x)
"""

# values are ("C", label, value) for constructors and ("R", {label: value})
# for records


def random_value(rng: random.Random, ty: str, depth: int):
    if ty == "nat":
        if depth <= 0 or rng.random() < 0.4:
            return ("C", "Zero", ("R", {}))
        return ("C", "Succ", random_value(rng, "nat", depth - 1))
    if ty == "list":
        if depth <= 0 or rng.random() < 0.3:
            return ("C", "Nil", ("R", {}))
        pair = (
            "R",
            {
                "Fst": random_value(rng, "nat", depth - 1),
                "Snd": random_value(rng, "list", depth - 1),
            },
        )
        return ("C", "Cons", pair)
    raise ValueError(ty)


def pattern_for_value(rng: random.Random, value, names):
    """Pattern source text guaranteed to match `value`, binding fresh
    variables at the leaves it abstracts. Returns (text, {name: subvalue})."""
    if rng.random() < 0.35:
        name = f"v{len(names)}"
        names[name] = value
        return name, names
    kind = value[0]
    if kind == "R":
        if not value[1]:
            name = f"v{len(names)}"
            names[name] = value
            return name, names
        parts = []
        for lab in sorted(value[1]):
            text, names = pattern_for_value(rng, value[1][lab], names)
            parts.append(f"{lab} = {text}")
        return "{ " + " ; ".join(parts) + " }", names
    label, payload = value[1], value[2]
    if payload == ("R", {}):
        return label, names
    text, names = pattern_for_value(rng, payload, names)
    return f"({label} {text})", names


def match_value(chain: Chain, value):
    """Independently follow a substitution chain through a value."""
    for step in reversed(chain.steps):
        if step.kind == "proj":
            assert value[0] == "R", f"projection {step.label} on {value}"
            value = value[1][step.label]
        else:
            assert value[0] == "C" and value[1] == step.label, (
                f"constructor peel {step.label} on {value}"
            )
            value = value[2]
    return value
