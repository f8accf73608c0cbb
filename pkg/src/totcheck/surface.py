"""Surface syntax for .ch programs: lexing, parsing, desugaring, formatting.

The concrete syntax is a small functional language with `data`/`codata`
declarations and `val` definitions by pattern-matching clauses.  Parsing
produces a sugared tree; `desugar` rewrites numerals, list notation, n+k
patterns, wildcards and bare/n-ary constructors into the core forms and
resolves names to variables or function references.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


class SourceError(Exception):
    """Error with a source position."""

    def __init__(self, message: str, line=0, col: int = 0):
        super().__init__(message)
        if isinstance(line, tuple):  # a (line, col) location
            line, col = line
        elif line is None:
            line, col = 0, 0
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line:
            return f"{self.line}:{self.col}: {self.message}"
        return self.message


class ParseError(SourceError):
    pass


class DesugarError(SourceError):
    pass


KEYWORDS = {"data", "codata", "where", "val", "and"}


# ---------------------------------------------------------------------------
# type expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TVar:
    """Type variable 'x (also reused for scheme parameters)."""

    name: str

    def __str__(self) -> str:
        return f"'{self.name}"


@dataclass(frozen=True)
class TApp:
    """Named type, possibly applied: nat, list(nat), stream(list(nat))."""

    name: str
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class TArrow:
    left: "TypeExpr"
    right: "TypeExpr"

    def __str__(self) -> str:
        l = f"({self.left})" if isinstance(self.left, TArrow) else str(self.left)
        return f"{l} -> {self.right}"


TypeExpr = Union[TVar, TApp, TArrow]


# ---------------------------------------------------------------------------
# declarations and program structure
# ---------------------------------------------------------------------------


@dataclass
class TypeDecl:
    """One data/codata declaration.

    `items` holds (label, payload): for data, payload is the constructor's
    argument type; for codata, the destructor's result type.  The self-typed
    side is fixed by the grammar (`C : T -> self(params)` resp.
    `D : self(params) -> T`).
    """

    name: str
    polarity: str  # "data" | "codata"
    params: tuple[str, ...]
    items: tuple[tuple[str, TypeExpr], ...]
    loc: tuple[int, int] = field(default=(0, 0), compare=False)

    @property
    def is_data(self) -> bool:
        return self.polarity == "data"

    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.items)


@dataclass
class Clause:
    name: str
    patterns: tuple["Pattern", ...]
    body: "Term"
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class DefGroup:
    """One `val` block: mutually recursive functions with optional signatures."""

    functions: tuple[str, ...]
    signatures: dict[str, TypeExpr]
    clauses: tuple[Clause, ...]
    loc: tuple[int, int] = field(default=(0, 0), compare=False)

    def clauses_of(self, name: str) -> list[Clause]:
        return [c for c in self.clauses if c.name == name]


@dataclass
class Program:
    type_groups: tuple[tuple[TypeDecl, ...], ...]
    def_groups: tuple[DefGroup, ...]

    def decls(self) -> Iterator[TypeDecl]:
        for g in self.type_groups:
            yield from g


# ---------------------------------------------------------------------------
# patterns
# ---------------------------------------------------------------------------


@dataclass
class PVar:
    name: str
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class PCtor:
    label: str
    arg: "Pattern"
    loc: tuple[int, int] = field(default=(0, 0), compare=False)
    ty: Optional[TypeExpr] = field(default=None, compare=False)
    prio: Optional[int] = field(default=None, compare=False)


@dataclass
class PRec:
    fields: tuple[tuple[str, "Pattern"], ...]
    loc: tuple[int, int] = field(default=(0, 0), compare=False)
    ty: Optional[TypeExpr] = field(default=None, compare=False)
    prio: Optional[int] = field(default=None, compare=False)


# sugar-only pattern forms, removed by desugar
@dataclass
class PWild:
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class PInt:
    value: int
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class PList:
    items: tuple["Pattern", ...]
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class PConsS:
    head: "Pattern"
    tail: "Pattern"
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class PPlus:
    base: "Pattern"
    count: int
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class PCtorN:
    """Constructor applied to zero or more pattern atoms (pre-desugar)."""

    label: str
    args: tuple["Pattern", ...]
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


Pattern = Union[PVar, PCtor, PRec, PWild, PInt, PList, PConsS, PPlus, PCtorN]


# ---------------------------------------------------------------------------
# terms
# ---------------------------------------------------------------------------


@dataclass
class Var:
    name: str
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class Fun:
    """Reference to a defined function."""

    name: str
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class CtorVal:
    """An unapplied constructor used as a function value."""

    label: str
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class Ctor:
    label: str
    arg: "Term"
    loc: tuple[int, int] = field(default=(0, 0), compare=False)
    ty: Optional[TypeExpr] = field(default=None, compare=False)
    prio: Optional[int] = field(default=None, compare=False)


@dataclass
class Rec:
    fields: tuple[tuple[str, "Term"], ...]
    loc: tuple[int, int] = field(default=(0, 0), compare=False)
    ty: Optional[TypeExpr] = field(default=None, compare=False)
    prio: Optional[int] = field(default=None, compare=False)


@dataclass
class App:
    fn: "Term"
    arg: "Term"
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


# sugar-only term forms
@dataclass
class Name:
    """Unresolved lowercase identifier (variable or function)."""

    name: str
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class IntLit:
    value: int
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class ListLit:
    items: tuple["Term", ...]
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class ConsS:
    head: "Term"
    tail: "Term"
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass
class PlusS:
    base: "Term"
    count: int
    loc: tuple[int, int] = field(default=(0, 0), compare=False)


Term = Union[Var, Fun, CtorVal, Ctor, Rec, App, Name, IntLit, ListLit, ConsS, PlusS]


def spine(t: Term) -> tuple[Term, list[Term]]:
    """Decompose an application into head and argument list."""
    args: list[Term] = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return t, args


def app_spine(head: Term, args: list[Term]) -> Term:
    for a in args:
        head = App(head, a)
    return head


# ---------------------------------------------------------------------------
# lexer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


PUNCT = ["->", "::", "(", ")", "{", "}", "[", "]", "=", "|", ";", ":", ",", "+", "."]


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("--", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c == "'":
            j = i + 1
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            if j == i + 1:
                raise ParseError("expected type variable name after '", line, col)
            toks.append(Token("TYVAR", src[i + 1 : j], line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("INT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            if word == "_":
                kind = "WILD"
            elif word in KEYWORDS:
                kind = word.upper()
            elif word[0].isupper():
                kind = "LABEL"
            else:
                kind = "NAME"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        for p in PUNCT:
            if src.startswith(p, i):
                toks.append(Token(p, p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

PATTERN_ATOM_START = {"NAME", "WILD", "INT", "LABEL", "(", "{", "["}
TERM_ATOM_START = {"NAME", "INT", "LABEL", "(", "{", "["}


class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    # ---- program

    def parse_program(self) -> Program:
        type_groups: list[tuple[TypeDecl, ...]] = []
        def_groups: list[DefGroup] = []
        while not self.at("EOF"):
            t = self.peek()
            if t.kind in ("DATA", "CODATA"):
                type_groups.append(self.type_group())
            elif t.kind == "VAL":
                def_groups.append(self.def_group())
            elif t.kind == "(":
                raise ParseError(
                    "copattern definitions are not supported; define the whole record on the right-hand side",
                    t.line,
                    t.col,
                )
            else:
                raise ParseError(f"expected 'data', 'codata' or 'val', found {t.text!r}", t.line, t.col)
        return Program(tuple(type_groups), tuple(def_groups))

    def type_group(self) -> tuple[TypeDecl, ...]:
        decls = [self.type_decl(self.next().text)]
        while self.at("AND"):
            self.next()
            pol = decls[-1].polarity
            if self.peek().kind in ("DATA", "CODATA"):
                pol = self.next().text
            decls.append(self.type_decl(pol))
        return tuple(decls)

    def type_decl(self, polarity: str) -> TypeDecl:
        name_tok = self.expect("NAME")
        params: list[str] = []
        if self.at("("):
            self.next()
            params.append(self.expect("TYVAR").text)
            while self.at(","):
                self.next()
                params.append(self.expect("TYVAR").text)
            self.expect(")")
        self.expect("WHERE")
        items: list[tuple[str, TypeExpr]] = []
        if self.at("|"):
            self.next()
        while self.at("LABEL"):
            items.append(self.decl_item(name_tok.text, tuple(params), polarity))
            if self.at("|"):
                self.next()
            else:
                break
        return TypeDecl(name_tok.text, polarity, tuple(params), tuple(items), (name_tok.line, name_tok.col))

    def decl_item(self, tyname: str, params: tuple[str, ...], polarity: str) -> tuple[str, TypeExpr]:
        lab = self.expect("LABEL")
        self.expect(":")
        ty = self.type_expr()
        selfty = TApp(tyname, tuple(TVar(p) for p in params))
        if not isinstance(ty, TArrow):
            raise ParseError(
                f"declaration of {lab.text} must be an arrow ({'T -> ' + str(selfty) if polarity == 'data' else str(selfty) + ' -> T'})",
                lab.line,
                lab.col,
            )
        if polarity == "data":
            if isinstance(ty.right, TArrow):
                raise ParseError(
                    f"constructor {lab.text} takes exactly one argument; use a record type for several",
                    lab.line,
                    lab.col,
                )
            if ty.right != selfty:
                raise ParseError(f"constructor {lab.text} must produce {selfty}", lab.line, lab.col)
            return (lab.text, ty.left)
        else:
            if ty.left != selfty:
                raise ParseError(f"destructor {lab.text} must consume {selfty}", lab.line, lab.col)
            return (lab.text, ty.right)

    # ---- types

    def type_expr(self) -> TypeExpr:
        left = self.type_atom()
        if self.at("->"):
            self.next()
            return TArrow(left, self.type_expr())
        return left

    def type_atom(self) -> TypeExpr:
        t = self.peek()
        if t.kind == "TYVAR":
            self.next()
            return TVar(t.text)
        if t.kind == "NAME":
            self.next()
            args: list[TypeExpr] = []
            if self.at("("):
                self.next()
                args.append(self.type_expr())
                while self.at(","):
                    self.next()
                    args.append(self.type_expr())
                self.expect(")")
            return TApp(t.text, tuple(args))
        if t.kind == "(":
            self.next()
            inner = self.type_expr()
            self.expect(")")
            return inner
        raise ParseError(f"expected a type, found {t.text!r}", t.line, t.col)

    # ---- definitions

    def def_group(self) -> DefGroup:
        val_tok = self.expect("VAL")
        functions: list[str] = []
        signatures: dict[str, TypeExpr] = {}
        clauses: list[Clause] = []
        while True:
            t = self.peek()
            if t.kind == "(":
                raise ParseError(
                    "copattern definitions are not supported; define the whole record on the right-hand side",
                    t.line,
                    t.col,
                )
            name_tok = self.expect("NAME")
            if name_tok.text not in functions:
                functions.append(name_tok.text)
            if self.at(":"):
                self.next()
                if name_tok.text in signatures:
                    raise ParseError(f"duplicate signature for {name_tok.text}", name_tok.line, name_tok.col)
                signatures[name_tok.text] = self.type_expr()
            else:
                clauses.append(self.clause_rest(name_tok))
            if self.at("|"):
                self.next()
                continue
            break
        if not clauses:
            t = self.peek()
            raise ParseError("val block has signatures but no clauses", t.line, t.col)
        return DefGroup(tuple(functions), signatures, tuple(clauses), (val_tok.line, val_tok.col))

    def clause_rest(self, name_tok: Token) -> Clause:
        pats: list[Pattern] = []
        while self.peek().kind in PATTERN_ATOM_START:
            pats.append(self.pattern_atom())
        if self.at("."):
            t = self.peek()
            raise ParseError(
                "copattern definitions are not supported; define the whole record on the right-hand side",
                t.line,
                t.col,
            )
        self.expect("=")
        body = self.term()
        return Clause(name_tok.text, tuple(pats), body, (name_tok.line, name_tok.col))

    # ---- patterns

    def pattern(self) -> Pattern:
        left = self.pattern_plus()
        if self.at("::"):
            t = self.next()
            return PConsS(left, self.pattern(), (t.line, t.col))
        return left

    def pattern_plus(self) -> Pattern:
        p = self.pattern_app()
        while self.at("+"):
            t = self.next()
            k = self.expect("INT")
            p = PPlus(p, int(k.text), (t.line, t.col))
        return p

    def pattern_app(self) -> Pattern:
        t = self.peek()
        if t.kind == "LABEL":
            self.next()
            args: list[Pattern] = []
            while self.peek().kind in PATTERN_ATOM_START:
                args.append(self.pattern_atom())
            return PCtorN(t.text, tuple(args), (t.line, t.col))
        return self.pattern_atom()

    def pattern_atom(self) -> Pattern:
        t = self.peek()
        if t.kind == "NAME":
            self.next()
            return PVar(t.text, (t.line, t.col))
        if t.kind == "WILD":
            self.next()
            return PWild((t.line, t.col))
        if t.kind == "INT":
            self.next()
            return PInt(int(t.text), (t.line, t.col))
        if t.kind == "LABEL":
            self.next()
            return PCtorN(t.text, (), (t.line, t.col))
        if t.kind == "(":
            self.next()
            p = self.pattern()
            self.expect(")")
            return p
        if t.kind == "[":
            self.next()
            items: list[Pattern] = []
            if not self.at("]"):
                items.append(self.pattern())
                while self.at(","):
                    self.next()
                    items.append(self.pattern())
            self.expect("]")
            return PList(tuple(items), (t.line, t.col))
        if t.kind == "{":
            self.next()
            fields: list[tuple[str, Pattern]] = []
            if not self.at("}"):
                while True:
                    lab = self.expect("LABEL")
                    self.expect("=")
                    fields.append((lab.text, self.pattern()))
                    if self.at(";"):
                        self.next()
                        continue
                    break
            self.expect("}")
            return PRec(tuple(fields), (t.line, t.col))
        raise ParseError(f"expected a pattern, found {t.text!r}", t.line, t.col)

    # ---- terms

    def term(self) -> Term:
        left = self.term_plus()
        if self.at("::"):
            t = self.next()
            return ConsS(left, self.term(), (t.line, t.col))
        return left

    def term_plus(self) -> Term:
        u = self.term_app()
        while self.at("+"):
            t = self.next()
            k = self.expect("INT")
            u = PlusS(u, int(k.text), (t.line, t.col))
        return u

    def term_app(self) -> Term:
        t = self.peek()
        u = self.term_atom()
        while self.peek().kind in TERM_ATOM_START:
            u = App(u, self.term_atom(), (t.line, t.col))
        if self.at("."):
            d = self.peek()
            raise ParseError(
                "projections are not allowed in terms; match on a record pattern instead",
                d.line,
                d.col,
            )
        return u

    def term_atom(self) -> Term:
        t = self.peek()
        if t.kind == "NAME":
            self.next()
            return Name(t.text, (t.line, t.col))
        if t.kind == "LABEL":
            self.next()
            return CtorVal(t.text, (t.line, t.col))
        if t.kind == "INT":
            self.next()
            return IntLit(int(t.text), (t.line, t.col))
        if t.kind == "(":
            self.next()
            u = self.term()
            self.expect(")")
            return u
        if t.kind == "[":
            self.next()
            items: list[Term] = []
            if not self.at("]"):
                items.append(self.term())
                while self.at(","):
                    self.next()
                    items.append(self.term())
            self.expect("]")
            return ListLit(tuple(items), (t.line, t.col))
        if t.kind == "{":
            self.next()
            fields: list[tuple[str, Term]] = []
            if not self.at("}"):
                while True:
                    lab = self.expect("LABEL")
                    self.expect("=")
                    fields.append((lab.text, self.term()))
                    if self.at(";"):
                        self.next()
                        continue
                    break
            self.expect("}")
            return Rec(tuple(fields), (t.line, t.col))
        raise ParseError(f"expected a term, found {t.text or 'end of input'!r}", t.line, t.col)


def parse_program(src: str) -> Program:
    return _Parser(tokenize(src)).parse_program()


def parse_term(src: str) -> Term:
    p = _Parser(tokenize(src))
    t = p.term()
    tok = p.peek()
    if tok.kind != "EOF":
        raise ParseError(f"unexpected {tok.text!r} after expression", tok.line, tok.col)
    return t


# ---------------------------------------------------------------------------
# desugaring
# ---------------------------------------------------------------------------


class _SugarEnv:
    """Lookup tables for the declared types, as far as desugaring needs them."""

    def __init__(self, decls: list[TypeDecl]):
        self.decls: dict[str, TypeDecl] = {}
        self.owner: dict[str, TypeDecl] = {}
        for d in decls:
            self.decls[d.name] = d
            for lab, _ in d.items:
                self.owner.setdefault(lab, d)

    def ctor_domain_fields(self, label: str) -> Optional[tuple[str, ...]]:
        """Field labels (in declaration order) of a constructor's record domain."""
        d = self.owner.get(label)
        if d is None or not d.is_data:
            return None
        payload = dict(d.items)[label]
        if isinstance(payload, TApp) and payload.name in self.decls:
            dom = self.decls[payload.name]
            if not dom.is_data:
                return dom.labels()
        return None

    def require(self, label: str, loc: tuple[int, int], what: str) -> TypeDecl:
        d = self.owner.get(label)
        if d is None:
            raise DesugarError(f"{what} needs a declared constructor {label}", *loc)
        return d


class _Desugarer:
    def __init__(self, env: _SugarEnv):
        self.env = env
        self.fresh = 0

    # -- helpers

    def check_label(self, label: str, loc: tuple[int, int]) -> TypeDecl:
        d = self.env.owner.get(label)
        if d is None:
            raise DesugarError(f"unknown constructor or destructor {label}", *loc)
        return d

    def numeral(self, k: int, loc: tuple[int, int], wrap, base) -> object:
        self.env.require("Zero", loc, "numeral notation")
        self.env.require("Succ", loc, "numeral notation")
        t = base
        for _ in range(k):
            t = wrap(t)
        return t

    def nullary(self, label: str, loc: tuple[int, int]) -> Optional[tuple[()]]:
        """Check that `label` can be used bare: its domain is a 0-field codata."""
        fields = self.env.ctor_domain_fields(label)
        return () if fields == () else None

    # -- patterns

    def pattern(self, p: Pattern, bound: dict[str, tuple[int, int]]) -> Pattern:
        if isinstance(p, PVar):
            if p.name in bound:
                raise DesugarError(f"pattern variable {p.name} is bound twice", *p.loc)
            bound[p.name] = p.loc
            return p
        if isinstance(p, PWild):
            self.fresh += 1
            name = f"_{self.fresh}"
            bound[name] = p.loc
            return PVar(name, p.loc)
        if isinstance(p, PInt):
            return self.numeral(
                p.value,
                p.loc,
                lambda t: PCtor("Succ", t, p.loc),
                PCtor("Zero", PRec((), p.loc), p.loc),
            )
        if isinstance(p, PPlus):
            self.env.require("Succ", p.loc, "n+k notation")
            t = self.pattern(p.base, bound)
            for _ in range(p.count):
                t = PCtor("Succ", t, p.loc)
            return t
        if isinstance(p, PList):
            self.env.require("Nil", p.loc, "list notation")
            self.env.require("Cons", p.loc, "list notation")
            t: Pattern = PCtor("Nil", PRec((), p.loc), p.loc)
            for item in reversed(p.items):
                t = self.cons_pair(self.pattern(item, bound), t, p.loc, PCtor, PRec)
            return t
        if isinstance(p, PConsS):
            self.env.require("Cons", p.loc, "cons notation")
            return self.cons_pair(self.pattern(p.head, bound), self.pattern(p.tail, bound), p.loc, PCtor, PRec)
        if isinstance(p, PCtorN):
            self.check_label(p.label, p.loc)
            if len(p.args) == 1:
                return PCtor(p.label, self.pattern(p.args[0], bound), p.loc)
            fields = self.env.ctor_domain_fields(p.label)
            if not p.args:
                if fields == ():
                    return PCtor(p.label, PRec((), p.loc), p.loc)
                raise DesugarError(f"constructor {p.label} needs an argument", *p.loc)
            if fields is None or len(fields) != len(p.args):
                raise DesugarError(
                    f"constructor {p.label} cannot take {len(p.args)} arguments", *p.loc
                )
            rec = tuple(sorted(zip(fields, (self.pattern(a, bound) for a in p.args))))
            return PCtor(p.label, PRec(rec, p.loc), p.loc)
        if isinstance(p, PCtor):
            self.check_label(p.label, p.loc)
            return PCtor(p.label, self.pattern(p.arg, bound), p.loc)
        if isinstance(p, PRec):
            seen: set[str] = set()
            fields = []
            for lab, q in p.fields:
                if lab in seen:
                    raise DesugarError(f"duplicate record field {lab}", *p.loc)
                seen.add(lab)
                fields.append((lab, self.pattern(q, bound)))
            return PRec(tuple(sorted(fields)), p.loc)
        raise DesugarError(f"unexpected pattern form {type(p).__name__}", *getattr(p, "loc", (0, 0)))

    def cons_pair(self, head, tail, loc, mk_ctor, mk_rec):
        fields = self.env.ctor_domain_fields("Cons")
        if fields is None or len(fields) != 2:
            raise DesugarError("Cons must be declared over a two-field record type", *loc)
        rec = tuple(sorted(zip(fields, (head, tail))))
        return mk_ctor("Cons", mk_rec(rec, loc), loc)

    # -- terms

    def term(self, t: Term, scope: set[str], funs: set[str]) -> Term:
        if isinstance(t, Name):
            if t.name in scope:
                return Var(t.name, t.loc)
            if t.name in funs:
                return Fun(t.name, t.loc)
            raise DesugarError(f"unbound name {t.name}", *t.loc)
        if isinstance(t, IntLit):
            return self.numeral(
                t.value,
                t.loc,
                lambda u: Ctor("Succ", u, t.loc),
                Ctor("Zero", Rec((), t.loc), t.loc),
            )
        if isinstance(t, PlusS):
            self.env.require("Succ", t.loc, "n+k notation")
            u = self.term(t.base, scope, funs)
            for _ in range(t.count):
                u = Ctor("Succ", u, t.loc)
            return u
        if isinstance(t, ListLit):
            self.env.require("Nil", t.loc, "list notation")
            self.env.require("Cons", t.loc, "list notation")
            u: Term = Ctor("Nil", Rec((), t.loc), t.loc)
            for item in reversed(t.items):
                u = self.cons_pair(self.term(item, scope, funs), u, t.loc, Ctor, Rec)
            return u
        if isinstance(t, ConsS):
            self.env.require("Cons", t.loc, "cons notation")
            return self.cons_pair(
                self.term(t.head, scope, funs), self.term(t.tail, scope, funs), t.loc, Ctor, Rec
            )
        if isinstance(t, App):
            head, args = spine(t)
            dargs = [self.term(a, scope, funs) for a in args]
            if isinstance(head, CtorVal):
                return self.ctor_app(head, dargs, scope, funs)
            return app_spine(self.term(head, scope, funs), dargs)
        if isinstance(t, CtorVal):
            return self.ctor_app(t, [], scope, funs)
        if isinstance(t, Ctor):
            self.check_label(t.label, t.loc)
            return Ctor(t.label, self.term(t.arg, scope, funs), t.loc)
        if isinstance(t, Rec):
            seen: set[str] = set()
            fields = []
            for lab, u in t.fields:
                if lab in seen:
                    raise DesugarError(f"duplicate record field {lab}", *t.loc)
                seen.add(lab)
                fields.append((lab, self.term(u, scope, funs)))
            return Rec(tuple(sorted(fields)), t.loc)
        if isinstance(t, (Var, Fun)):
            return t
        raise DesugarError(f"unexpected term form {type(t).__name__}", *getattr(t, "loc", (0, 0)))

    def ctor_app(self, head: CtorVal, args: list[Term], scope: set[str], funs: set[str]) -> Term:
        self.check_label(head.label, head.loc)
        if len(args) == 1:
            return Ctor(head.label, args[0], head.loc)
        if not args:
            if self.nullary(head.label, head.loc) is not None:
                return Ctor(head.label, Rec((), head.loc), head.loc)
            return head  # genuine constructor value, e.g. map_stream Succ nats
        fields = self.env.ctor_domain_fields(head.label)
        if fields is None or len(fields) != len(args):
            raise DesugarError(
                f"constructor {head.label} cannot take {len(args)} arguments", *head.loc
            )
        rec = tuple(sorted(zip(fields, args)))
        return Ctor(head.label, Rec(rec, head.loc), head.loc)


def desugar(p: Program) -> Program:
    """Rewrite all sugar to core forms and resolve names; raises DesugarError."""
    env = _SugarEnv(list(p.decls()))
    ds = _Desugarer(env)
    funs: set[str] = set()
    groups: list[DefGroup] = []
    for g in p.def_groups:
        funs |= set(g.functions)
        arities: dict[str, int] = {}
        clauses = []
        for c in g.clauses:
            if c.name in arities and arities[c.name] != len(c.patterns):
                raise DesugarError(f"clauses of {c.name} disagree on the number of arguments", *c.loc)
            arities[c.name] = len(c.patterns)
            bound: dict[str, tuple[int, int]] = {}
            pats = tuple(ds.pattern(q, bound) for q in c.patterns)
            body = ds.term(c.body, set(bound), funs)
            clauses.append(Clause(c.name, pats, body, c.loc))
        for f in g.functions:
            if f not in arities:
                raise DesugarError(f"function {f} has a signature but no clause", *g.loc)
        groups.append(DefGroup(g.functions, dict(g.signatures), tuple(clauses), g.loc))
    return Program(p.type_groups, tuple(groups))


def desugar_term(src_term: Term, prog: Program, funs: set[str]) -> Term:
    """Desugar a standalone closed term against a program's declarations."""
    ds = _Desugarer(_SugarEnv(list(prog.decls())))
    return ds.term(src_term, set(), funs)


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------


def format_type(t: TypeExpr) -> str:
    return str(t)


def _pattern_atomic(p: Pattern) -> bool:
    if isinstance(p, (PVar, PWild, PInt, PRec, PList)):
        return True
    if isinstance(p, PCtorN):
        return not p.args
    return False


def format_pattern(p: Pattern) -> str:
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, PWild):
        return "_"
    if isinstance(p, PInt):
        return str(p.value)
    if isinstance(p, PList):
        return "[" + ", ".join(format_pattern(q) for q in p.items) + "]"
    if isinstance(p, PConsS):
        head = format_pattern(p.head)
        if isinstance(p.head, (PConsS, PPlus)):
            head = f"({head})"
        return f"{head} :: {format_pattern(p.tail)}"
    if isinstance(p, PPlus):
        base = format_pattern(p.base)
        if not _pattern_atomic(p.base):
            base = f"({base})"
        return f"{base} + {p.count}"
    if isinstance(p, PCtorN):
        parts = [p.label]
        for a in p.args:
            s = format_pattern(a)
            parts.append(s if _pattern_atomic(a) else f"({s})")
        return " ".join(parts)
    if isinstance(p, PCtor):
        s = format_pattern(p.arg)
        return f"{p.label} {s}" if _pattern_atomic(p.arg) else f"{p.label} ({s})"
    if isinstance(p, PRec):
        if not p.fields:
            return "{ }"
        inner = " ; ".join(f"{lab} = {format_pattern(q)}" for lab, q in p.fields)
        return "{ " + inner + " }"
    raise ValueError(f"cannot format pattern {p!r}")


def _term_atomic(t: Term) -> bool:
    return isinstance(t, (Var, Fun, Name, CtorVal, Rec, IntLit, ListLit))


def format_term(t: Term) -> str:
    if isinstance(t, (Var, Fun, Name)):
        return t.name
    if isinstance(t, CtorVal):
        return t.label
    if isinstance(t, IntLit):
        return str(t.value)
    if isinstance(t, ListLit):
        return "[" + ", ".join(format_term(u) for u in t.items) + "]"
    if isinstance(t, ConsS):
        head = format_term(t.head)
        if isinstance(t.head, (ConsS, PlusS, App, Ctor)):
            head = f"({head})"
        return f"{head} :: {format_term(t.tail)}"
    if isinstance(t, PlusS):
        base = format_term(t.base)
        if not _term_atomic(t.base):
            base = f"({base})"
        return f"{base} + {t.count}"
    if isinstance(t, Ctor):
        s = format_term(t.arg)
        return f"{t.label} {s}" if _term_atomic(t.arg) else f"{t.label} ({s})"
    if isinstance(t, Rec):
        if not t.fields:
            return "{ }"
        inner = " ; ".join(f"{lab} = {format_term(u)}" for lab, u in t.fields)
        return "{ " + inner + " }"
    if isinstance(t, App):
        head, args = spine(t)
        parts = [format_term(head) if _term_atomic(head) else f"({format_term(head)})"]
        for a in args:
            s = format_term(a)
            parts.append(s if _term_atomic(a) else f"({s})")
        return " ".join(parts)
    raise ValueError(f"cannot format term {t!r}")


def format_decl(d: TypeDecl) -> str:
    head = d.name
    if d.params:
        head += "(" + ", ".join(f"'{p}" for p in d.params) + ")"
    selfty = TApp(d.name, tuple(TVar(p) for p in d.params))
    items = []
    for lab, payload in d.items:
        if d.is_data:
            items.append(f"{lab} : {format_type(TArrow(payload, selfty))}")
        else:
            items.append(f"{lab} : {format_type(TArrow(selfty, payload))}")
    body = " | ".join(items)
    return f"{head} where" + (f" {body}" if body else "")


def format_program(p: Program) -> str:
    chunks: list[str] = []
    for group in p.type_groups:
        parts = []
        for i, d in enumerate(group):
            kw = d.polarity if i == 0 else f"and {d.polarity}"
            parts.append(f"{kw} {format_decl(d)}")
        chunks.append("\n".join(parts))
    for g in p.def_groups:
        lines = []
        for f in g.functions:
            if f in g.signatures:
                lines.append(f"{f} : {format_type(g.signatures[f])}")
        for c in g.clauses:
            pats = "".join(
                " " + (format_pattern(q) if _pattern_atomic(q) else f"({format_pattern(q)})")
                for q in c.patterns
            )
            lines.append(f"{c.name}{pats} = {format_term(c.body)}")
        chunks.append("val " + "\n  | ".join(lines))
    return "\n\n".join(chunks) + "\n"
