"""A lazy (call-by-name) evaluator for checked programs.

Evaluation goes to weak head normal form: a constructor, a record, or an
under-applied function.  Arguments are passed as unevaluated thunks and
re-evaluated on every use (no sharing).  Every head step costs one unit of
fuel, so evaluation of non-terminating definitions fails loudly instead of
hanging; `force_depth` then reveals a value up to a chosen depth, trapping
fuel exhaustion per subterm so one diverging field cannot hide its
siblings.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import surface


class MatchFailure(Exception):
    """No clause matched, or a value was used at the wrong shape."""


class FuelExhausted(Exception):
    """The evaluation budget ran out."""


class Fuel:
    def __init__(self, amount: int):
        self.left = amount

    def tick(self):
        self.left -= 1
        if self.left < 0:
            raise FuelExhausted()


@dataclass
class Thunk:
    term: surface.Term
    env: dict[str, "Thunk"]


@dataclass
class CtorV:
    label: str
    arg: Thunk


@dataclass
class RecordV:
    fields: dict[str, Thunk]


@dataclass
class PartialV:
    name: str
    args: tuple[Thunk, ...]


@dataclass
class CtorFnV:
    label: str


Value = object


@dataclass
class Defs:
    clauses: dict[str, list[surface.Clause]]
    arity: dict[str, int]

    @staticmethod
    def from_program(program: surface.Program) -> "Defs":
        clauses: dict[str, list[surface.Clause]] = {}
        arity: dict[str, int] = {}
        for group in program.def_groups:
            for f in group.functions:
                cs = group.clauses_of(f)
                clauses[f] = cs
                arity[f] = len(cs[0].patterns)
        return Defs(clauses, arity)


def whnf(term: surface.Term, env: dict[str, Thunk], defs: Defs, fuel: Fuel) -> Value:
    stack: list[Thunk] = []  # pending arguments, innermost application last
    while True:
        fuel.tick()
        if isinstance(term, surface.App):
            stack.append(Thunk(term.arg, env))
            term = term.fn
        elif isinstance(term, surface.Var):
            th = env[term.name]
            term, env = th.term, th.env
        elif isinstance(term, surface.Fun):
            n = defs.arity[term.name]
            if len(stack) < n:
                args = tuple(stack.pop() for _ in range(len(stack)))
                return PartialV(term.name, args)
            args = tuple(stack.pop() for _ in range(n))
            term, env = _dispatch(term.name, args, defs, fuel)
        else:
            if isinstance(term, surface.Ctor):
                v: Value = CtorV(term.label, Thunk(term.arg, env))
            elif isinstance(term, surface.Rec):
                v = RecordV({lab: Thunk(u, env) for lab, u in term.fields})
            elif isinstance(term, surface.CtorVal):
                if stack:
                    v = CtorV(term.label, stack.pop())
                else:
                    v = CtorFnV(term.label)
            else:
                raise MatchFailure(f"cannot evaluate {term!r}")
            if stack:
                raise MatchFailure("a value that is not a function was applied to an argument")
            return v


def _dispatch(name: str, args: tuple[Thunk, ...], defs: Defs, fuel: Fuel):
    for clause in defs.clauses[name]:
        binds: dict[str, Thunk] = {}
        if all(_match(p, th, binds, defs, fuel) for p, th in zip(clause.patterns, args)):
            return clause.body, binds
    raise MatchFailure(f"no clause of {name} matches")


def _match(p, th: Thunk, binds: dict[str, Thunk], defs: Defs, fuel: Fuel) -> bool:
    if isinstance(p, surface.PVar):
        binds[p.name] = th
        return True
    v = whnf(th.term, th.env, defs, fuel)
    if isinstance(p, surface.PCtor):
        return (
            isinstance(v, CtorV)
            and v.label == p.label
            and _match(p.arg, v.arg, binds, defs, fuel)
        )
    if isinstance(p, surface.PRec):
        if not isinstance(v, RecordV):
            return False
        return all(
            lab in v.fields and _match(q, v.fields[lab], binds, defs, fuel)
            for lab, q in p.fields
        )
    raise MatchFailure(f"cannot match against pattern {p!r}")


# ---------------------------------------------------------------------------
# revealing values
# ---------------------------------------------------------------------------


def force_depth(v: Value, depth: int, defs: Defs, fuel: Fuel):
    """Reveal a value's heads down to `depth` levels.  Children past the
    depth limit come back suspended; a child that exhausts the fuel is
    marked without giving up on its siblings."""

    def child(th: Thunk, d: int):
        if d < 0:
            return ("susp",)
        try:
            return build(whnf(th.term, th.env, defs, fuel), d)
        except FuelExhausted:
            return ("fuel",)

    def build(v: Value, d: int):
        if isinstance(v, CtorV):
            return ("ctor", v.label, child(v.arg, d - 1))
        if isinstance(v, RecordV):
            return ("rec", tuple((lab, child(th, d - 1)) for lab, th in sorted(v.fields.items())))
        if isinstance(v, PartialV):
            return ("fun", v.name)
        return ("fun", v.label)  # CtorFnV

    return build(v, depth)


def format_forced(tree) -> str:
    kind = tree[0]
    if kind == "susp":
        return "..."
    if kind == "fuel":
        return "<fuel ran out>"
    if kind == "fun":
        return f"<function {tree[1]}>"
    if kind == "ctor":
        _, label, c = tree
        if c == ("rec", ()):
            return label  # nullary constructor, e.g. Zero
        inner = format_forced(c)
        if c[0] == "ctor" and " " in inner:
            inner = f"({inner})"
        return f"{label} {inner}"
    fields = tree[1]
    if not fields:
        return "{ }"
    inner = " ; ".join(f"{lab} = {format_forced(c)}" for lab, c in fields)
    return "{ " + inner + " }"
