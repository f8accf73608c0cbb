"""Type checking for the surface language.

Declarations are validated group by group, then each definition group is
typed with Hindley-Milner inference (recursion inside a group stays
monomorphic, generalization happens when the group is done).  Constructor,
record and pattern nodes are stamped with the concrete type they were used
at; the game construction reads those stamps later.

Also here: clause coverage (with a counterexample witness) and the
full-application check that keeps recursive calls first-order.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

from .surface import (
    Clause,
    Ctor,
    CtorVal,
    App,
    DefGroup,
    Fun,
    PCtor,
    PRec,
    PVar,
    PWild,
    Program,
    Rec,
    SourceError,
    TApp,
    TArrow,
    TVar,
    TypeDecl,
    Var,
    format_pattern,
    format_type,
    spine,
)


class TypeError(SourceError):
    """A type mismatch or an ill-formed declaration."""


class CoverageError(SourceError):
    """Clauses do not cover every value, or a record pattern is partial."""


class HigherOrderError(SourceError):
    """A group member is used without its full argument list."""


@dataclass(frozen=True)
class Scheme:
    vars: tuple[str, ...]
    type: "TApp | TVar | TArrow"

    def __str__(self) -> str:
        return format_type(self.type)


@dataclass
class TypeEnv:
    decls: dict[str, TypeDecl]
    owner: dict[str, TypeDecl]  # constructor/destructor label -> declaration
    sigs: dict[str, Scheme]

    def payload(self, label: str) -> "TApp | TVar | TArrow":
        decl = self.owner[label]
        for lab, ty in decl.items:
            if lab == label:
                return ty
        raise KeyError(label)


def subst_type(t, mapping):
    if isinstance(t, TVar):
        return mapping.get(t.name, t)
    if isinstance(t, TApp):
        return TApp(t.name, tuple(subst_type(a, mapping) for a in t.args))
    return TArrow(subst_type(t.left, mapping), subst_type(t.right, mapping))


def type_size(t) -> int:
    if isinstance(t, TVar):
        return 1
    if isinstance(t, TApp):
        return 1 + sum(type_size(a) for a in t.args)
    return 1 + type_size(t.left) + type_size(t.right)


# ---------------------------------------------------------------------------
# declaration validation
# ---------------------------------------------------------------------------


def validate_type_decls(program: Program) -> TypeEnv:
    decls: dict[str, TypeDecl] = {}
    owner: dict[str, TypeDecl] = {}

    def check_ref(t, decl: TypeDecl, group: tuple[TypeDecl, ...]):
        if isinstance(t, TVar):
            if t.name not in decl.params:
                raise TypeError(f"type variable '{t.name} is not a parameter of {decl.name}", decl.loc)
            return
        if isinstance(t, TArrow):
            check_ref(t.left, decl, group)
            check_ref(t.right, decl, group)
            return
        known = t.name in decls or any(d.name == t.name for d in group)
        if not known:
            raise TypeError(f"unknown type {t.name} in declaration of {decl.name}", decl.loc)
        arity = decls[t.name].params if t.name in decls else next(d for d in group if d.name == t.name).params
        if len(t.args) != len(arity):
            raise TypeError(f"{t.name} expects {len(arity)} argument(s)", decl.loc)
        if any(d.name == t.name for d in group):
            expected = tuple(TVar(p) for p in decl.params)
            if t.args != expected:
                raise TypeError(
                    f"recursive use of {t.name} must be applied to exactly the parameters", decl.loc
                )
        for a in t.args:
            check_ref(a, decl, group)

    for group in program.type_groups:
        if len({d.polarity for d in group}) > 1:
            raise TypeError("mutually declared types must share their polarity", group[0].loc)
        if len({d.params for d in group}) > 1:
            raise TypeError("mutually declared types must share their parameters", group[0].loc)
        for d in group:
            if d.name in decls or any(e.name == d.name for e in group if e is not d and e.name == d.name):
                raise TypeError(f"type {d.name} is declared twice", d.loc)
            if len(set(d.params)) != len(d.params):
                raise TypeError(f"duplicate parameter in declaration of {d.name}", d.loc)
        for d in group:
            for lab, payload in d.items:
                if lab in owner:
                    raise TypeError(f"label {lab} is declared twice", d.loc)
                check_ref(payload, d, group)
                owner[lab] = d
        for d in group:
            decls[d.name] = d
    return TypeEnv(decls, owner, {})


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------

_FLEX = "%"


class _Infer:
    def __init__(self, env: TypeEnv, local: dict | None = None):
        self.env = env
        self.local = local or {}
        self.subst: dict[str, object] = {}
        self.count = 0

    def fresh(self) -> TVar:
        self.count += 1
        return TVar(f"{_FLEX}{self.count}")

    def prune(self, t):
        while isinstance(t, TVar) and t.name in self.subst:
            t = self.subst[t.name]
        return t

    def occurs(self, name: str, t) -> bool:
        t = self.prune(t)
        if isinstance(t, TVar):
            return t.name == name
        if isinstance(t, TApp):
            return any(self.occurs(name, a) for a in t.args)
        return self.occurs(name, t.left) or self.occurs(name, t.right)

    def zonk(self, t):
        t = self.prune(t)
        if isinstance(t, TVar):
            return t
        if isinstance(t, TApp):
            return TApp(t.name, tuple(self.zonk(a) for a in t.args))
        return TArrow(self.zonk(t.left), self.zonk(t.right))

    def unify(self, a, b, loc):
        a, b = self.prune(a), self.prune(b)
        if isinstance(a, TVar) and isinstance(b, TVar) and a.name == b.name:
            return
        if isinstance(a, TVar) and a.name.startswith(_FLEX):
            if self.occurs(a.name, b):
                raise TypeError(f"cannot build the infinite type {a.name} = {format_type(self.zonk(b))}", loc)
            self.subst[a.name] = b
            return
        if isinstance(b, TVar) and b.name.startswith(_FLEX):
            self.unify(b, a, loc)
            return
        if isinstance(a, TApp) and isinstance(b, TApp) and a.name == b.name and len(a.args) == len(b.args):
            for x, y in zip(a.args, b.args):
                self.unify(x, y, loc)
            return
        if isinstance(a, TArrow) and isinstance(b, TArrow):
            self.unify(a.left, b.left, loc)
            self.unify(a.right, b.right, loc)
            return
        raise TypeError(
            f"cannot match {format_type(self.zonk(a))} with {format_type(self.zonk(b))}", loc
        )

    def instantiate(self, scheme: Scheme):
        mapping = {v: self.fresh() for v in scheme.vars}
        return subst_type(scheme.type, mapping)

    # -- helpers ---------------------------------------------------------

    def ctor_types(self, label: str, loc):
        decl = self.env.owner.get(label)
        if decl is None:
            raise TypeError(f"unknown constructor {label}", loc)
        if not decl.is_data:
            raise TypeError(f"{label} is a destructor of {decl.name}, not a constructor", loc)
        mapping = {p: self.fresh() for p in decl.params}
        selfty = TApp(decl.name, tuple(mapping[p] for p in decl.params))
        return subst_type(self.env.payload(label), mapping), selfty

    def record_decl(self, labels: tuple[str, ...], loc) -> TypeDecl:
        if not labels:
            empties = [d for d in self.env.decls.values() if not d.is_data and not d.items]
            if not empties:
                raise TypeError("no record type with zero fields is in scope for { }", loc)
            if len(empties) > 1:
                names = ", ".join(sorted(d.name for d in empties))
                raise TypeError(f"{{ }} is ambiguous; it could be any of {names}", loc)
            return empties[0]
        decl = self.env.owner.get(labels[0])
        if decl is None:
            raise TypeError(f"unknown field {labels[0]}", loc)
        if decl.is_data:
            raise TypeError(f"{labels[0]} is a constructor of {decl.name}, not a record field", loc)
        for lab in labels:
            if self.env.owner.get(lab) is not decl:
                raise TypeError(f"field {lab} does not belong to {decl.name}", loc)
        return decl

    # -- patterns and terms ---------------------------------------------

    def pattern(self, p, ty, binds: dict):
        if isinstance(p, PVar):
            binds[p.name] = ty
            return
        if isinstance(p, PCtor):
            payload, selfty = self.ctor_types(p.label, p.loc)
            self.unify(ty, selfty, p.loc)
            p.ty = selfty
            self.pattern(p.arg, payload, binds)
            return
        if isinstance(p, PRec):
            decl = self.record_decl(tuple(lab for lab, _ in p.fields), p.loc)
            mapping = {q: self.fresh() for q in decl.params}
            selfty = TApp(decl.name, tuple(mapping[q] for q in decl.params))
            self.unify(ty, selfty, p.loc)
            p.ty = selfty
            for lab, sub in p.fields:
                self.pattern(sub, subst_type(self.env.payload(lab), mapping), binds)
            return
        raise TypeError(f"pattern {format_pattern(p)} survived desugaring", getattr(p, "loc", None))

    def term(self, t, binds: dict):
        if isinstance(t, Var):
            return binds[t.name]
        if isinstance(t, Fun):
            if t.name in self.local:
                return self.local[t.name]
            scheme = self.env.sigs.get(t.name)
            if scheme is None:
                raise TypeError(f"{t.name} has no usable signature", t.loc)
            return self.instantiate(scheme)
        if isinstance(t, CtorVal):
            payload, selfty = self.ctor_types(t.label, t.loc)
            return TArrow(payload, selfty)
        if isinstance(t, Ctor):
            payload, selfty = self.ctor_types(t.label, t.loc)
            self.unify(self.term(t.arg, binds), payload, t.loc)
            t.ty = selfty
            return selfty
        if isinstance(t, Rec):
            labels = tuple(lab for lab, _ in t.fields)
            decl = self.record_decl(labels, t.loc)
            for lab, _ in decl.items:
                if lab not in labels:
                    raise TypeError(f"record is missing field {lab} of {decl.name}", t.loc)
            mapping = {q: self.fresh() for q in decl.params}
            selfty = TApp(decl.name, tuple(mapping[q] for q in decl.params))
            for lab, sub in t.fields:
                self.unify(self.term(sub, binds), subst_type(self.env.payload(lab), mapping), t.loc)
            t.ty = selfty
            return selfty
        if isinstance(t, App):
            fty = self.term(t.fn, binds)
            aty = self.term(t.arg, binds)
            res = self.fresh()
            self.unify(fty, TArrow(aty, res), t.loc)
            return res
        raise TypeError("term form survived desugaring", getattr(t, "loc", None))


def _arrow_chain(args, ret):
    ty = ret
    for a in reversed(args):
        ty = TArrow(a, ty)
    return ty


class _Canon:
    """Deterministic renaming of the free variables left after zonking."""

    def __init__(self, inf: _Infer):
        self.inf = inf
        self.names: dict[str, TVar] = {}

    def _next(self) -> TVar:
        i = len(self.names)
        if i < len(string.ascii_lowercase):
            return TVar(string.ascii_lowercase[i])
        return TVar(f"a{i}")

    def __call__(self, t):
        t = self.inf.zonk(t)
        if isinstance(t, TVar):
            if t.name not in self.names:
                self.names[t.name] = self._next()
            return self.names[t.name]
        if isinstance(t, TApp):
            return TApp(t.name, tuple(self(a) for a in t.args))
        return TArrow(self(t.left), self(t.right))


def _type_vars(t) -> list[str]:
    if isinstance(t, TVar):
        return [t.name]
    if isinstance(t, TApp):
        out = []
        for a in t.args:
            out.extend(v for v in _type_vars(a) if v not in out)
        return out
    out = _type_vars(t.left)
    out.extend(v for v in _type_vars(t.right) if v not in out)
    return out


def _pattern_nodes(p):
    yield p
    if isinstance(p, PCtor):
        yield from _pattern_nodes(p.arg)
    elif isinstance(p, PRec):
        for _, sub in p.fields:
            yield from _pattern_nodes(sub)


def _term_nodes(t):
    yield t
    if isinstance(t, Ctor):
        yield from _term_nodes(t.arg)
    elif isinstance(t, Rec):
        for _, sub in t.fields:
            yield from _term_nodes(sub)
    elif isinstance(t, App):
        yield from _term_nodes(t.fn)
        yield from _term_nodes(t.arg)


def clause_nodes(clause: Clause):
    for p in clause.patterns:
        yield from _pattern_nodes(p)
    yield from _term_nodes(clause.body)


def infer_group(group: DefGroup, env: TypeEnv) -> None:
    """Type one definition group, stamping its nodes and extending env.sigs."""
    inf = _Infer(env)
    for f in group.functions:
        inf.local[f] = group.signatures.get(f) or inf.fresh()
    for clause in group.clauses:
        argtys = [inf.fresh() for _ in clause.patterns]
        ret = inf.fresh()
        inf.unify(inf.local[clause.name], _arrow_chain(argtys, ret), clause.loc)
        binds: dict[str, object] = {}
        for p, ty in zip(clause.patterns, argtys):
            inf.pattern(p, ty, binds)
        inf.unify(inf.term(clause.body, binds), ret, clause.loc)

    canon = _Canon(inf)
    for f in group.functions:
        ty = canon(inf.local[f])
        env.sigs[f] = Scheme(tuple(_type_vars(ty)), ty)
    for clause in group.clauses:
        for node in clause_nodes(clause):
            if isinstance(node, (Ctor, Rec, PCtor, PRec)) and node.ty is not None:
                node.ty = canon(node.ty)


def infer_types(program: Program, env: TypeEnv) -> Program:
    """Type every group in order.  Stamps are written into the program."""
    for group in program.def_groups:
        infer_group(group, env)
    return program


def infer_expr(term, env: TypeEnv):
    """Type a standalone (desugared) term against the checked program."""
    inf = _Infer(env)
    ty = inf.term(term, {})
    canon = _Canon(inf)
    for node in _term_nodes(term):
        if isinstance(node, (Ctor, Rec)) and node.ty is not None:
            node.ty = canon(node.ty)
    return canon(ty)


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------


def _complete_records(f: str, p, env: TypeEnv):
    for node in _pattern_nodes(p):
        if isinstance(node, PRec) and isinstance(node.ty, TApp):
            decl = env.decls[node.ty.name]
            have = {lab for lab, _ in node.fields}
            for lab, _ in decl.items:
                if lab not in have:
                    raise CoverageError(
                        f"{f}: record pattern for {decl.name} is missing field {lab}", node.loc
                    )


def _uncovered(tys: list, rows: list[list], env: TypeEnv):
    """A vector of patterns no row matches, or None when rows cover tys."""
    if not rows:
        return [PWild() for _ in tys]
    if not tys:
        return None
    t0 = tys[0]
    decl = env.decls.get(t0.name) if isinstance(t0, TApp) else None
    if all(isinstance(r[0], PVar) for r in rows) or decl is None:
        rest = _uncovered(tys[1:], [r[1:] for r in rows], env)
        return None if rest is None else [PWild()] + rest

    if decl.is_data:
        mapping = dict(zip(decl.params, t0.args))
        for lab, payload in decl.items:
            sub = []
            for r in rows:
                if isinstance(r[0], PVar):
                    sub.append([PVar("_", r[0].loc)] + r[1:])
                elif isinstance(r[0], PCtor) and r[0].label == lab:
                    sub.append([r[0].arg] + r[1:])
            w = _uncovered([subst_type(payload, mapping)] + tys[1:], sub, env)
            if w is not None:
                return [PCtor(lab, w[0])] + w[1:]
        return None

    mapping = dict(zip(decl.params, t0.args))
    labs = sorted(lab for lab, _ in decl.items)
    pays = [subst_type(self_payload, mapping) for self_payload in (dict(decl.items)[l] for l in labs)]
    sub = []
    for r in rows:
        if isinstance(r[0], PVar):
            sub.append([PVar("_", r[0].loc) for _ in labs] + r[1:])
        else:
            fields = dict(r[0].fields)
            sub.append([fields[l] for l in labs] + r[1:])
    w = _uncovered(pays + tys[1:], sub, env)
    if w is None:
        return None
    k = len(labs)
    return [PRec(tuple(zip(labs, w[:k])))] + w[k:]


def check_exhaustiveness_group(group: DefGroup, env: TypeEnv) -> None:
    for f in group.functions:
        clauses = group.clauses_of(f)
        for clause in clauses:
            for p in clause.patterns:
                _complete_records(f, p, env)
        if not clauses or not clauses[0].patterns:
            continue
        scheme = env.sigs[f]
        tys = []
        ty = scheme.type
        for _ in clauses[0].patterns:
            tys.append(ty.left)
            ty = ty.right
        witness = _uncovered(tys, [list(c.patterns) for c in clauses], env)
        if witness is not None:
            shown = " ".join(
                f"({format_pattern(w)})" if isinstance(w, PCtor) else format_pattern(w) for w in witness
            )
            raise CoverageError(f"{f} does not cover {shown}", clauses[0].loc)


def check_exhaustiveness(program: Program, env: TypeEnv) -> None:
    for group in program.def_groups:
        check_exhaustiveness_group(group, env)


# ---------------------------------------------------------------------------
# full application
# ---------------------------------------------------------------------------


def check_full_application_group(group: DefGroup, env: TypeEnv) -> None:
    members = {f: len(group.clauses_of(f)[0].patterns) for f in group.functions}

    def walk(t):
        head, args = spine(t)
        if isinstance(head, Fun) and head.name in members:
            want = members[head.name]
            if len(args) != want:
                plural = "argument" if want == 1 else "arguments"
                raise HigherOrderError(
                    f"{head.name} must be applied to exactly {want} {plural} here", head.loc
                )
        if isinstance(head, Ctor):
            walk(head.arg)
        elif isinstance(head, Rec):
            for _, sub in head.fields:
                walk(sub)
        for a in args:
            walk(a)

    for clause in group.clauses:
        walk(clause.body)


def check_full_application(program: Program, env: TypeEnv) -> None:
    for group in program.def_groups:
        check_full_application_group(group, env)
