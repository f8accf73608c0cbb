"""Priorities for constructors and destructors, read off a parity game.

Every type a constructor or record was used at becomes a node; unfolding a
node through its constructors (for data) or destructors (for codata) gives
the edges.  Each node gets a priority: odd for data, even for codata, and at
least as high as the priority of every node it occurs inside syntactically.
Type variables and arrow types carry no size information and sit at
infinity.

Since a type is strictly larger than anything occurring inside it, handing
out priorities in order of decreasing size meets every constraint in one
pass, and each node receives the least legal priority of its polarity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .surface import Ctor, PCtor, PRec, Program, Rec, TApp, TArrow, TypeExpr, format_type
from .typesys import TypeEnv, clause_nodes, subst_type, type_size

INF = float("inf")

Priority = Union[int, float]


@dataclass
class TypeGraph:
    nodes: list[TypeExpr]  # insertion-ordered, no duplicates
    edges: list[tuple[TypeExpr, str, TypeExpr]]


@dataclass
class ParityGame:
    graph: TypeGraph
    priority: dict[TypeExpr, Priority]


@dataclass
class AnnotatedProgram:
    program: Program
    game: ParityGame
    env: TypeEnv


def occurs_in(sub: TypeExpr, sup: TypeExpr) -> bool:
    if sub == sup:
        return True
    if isinstance(sup, TApp):
        return any(occurs_in(sub, a) for a in sup.args)
    if isinstance(sup, TArrow):
        return occurs_in(sub, sup.left) or occurs_in(sub, sup.right)
    return False


def build_type_graph(roots: list[TypeExpr], env: TypeEnv) -> TypeGraph:
    nodes: list[TypeExpr] = []
    seen: set[TypeExpr] = set()
    edges: list[tuple[TypeExpr, str, TypeExpr]] = []
    work = list(roots)
    while work:
        t = work.pop(0)
        if t in seen:
            continue
        seen.add(t)
        nodes.append(t)
        if isinstance(t, TApp) and t.name in env.decls:
            decl = env.decls[t.name]
            mapping = dict(zip(decl.params, t.args))
            for lab, payload in decl.items:
                target = subst_type(payload, mapping)
                edges.append((t, lab, target))
                work.append(target)
    return TypeGraph(nodes, edges)


def assign_priorities(graph: TypeGraph, env: TypeEnv) -> ParityGame:
    tapps = [n for n in graph.nodes if isinstance(n, TApp) and n.name in env.decls]
    priority: dict[TypeExpr, Priority] = {
        n: INF for n in graph.nodes if not (isinstance(n, TApp) and n.name in env.decls)
    }
    for n in sorted(tapps, key=lambda n: (-type_size(n), format_type(n))):
        parity = 1 if env.decls[n.name].is_data else 0
        best = parity
        for m in tapps:
            if m != n and occurs_in(n, m):
                p = priority[m]  # m is strictly larger, so already assigned
                best = max(best, p if p % 2 == parity else p + 1)
        priority[n] = best
    return ParityGame(graph, priority)


def stamp_roots(program: Program) -> list[TypeExpr]:
    roots: list[TypeExpr] = []
    seen: set[TypeExpr] = set()
    for group in program.def_groups:
        for clause in group.clauses:
            for node in clause_nodes(clause):
                if isinstance(node, (Ctor, Rec, PCtor, PRec)) and node.ty is not None:
                    if node.ty not in seen:
                        seen.add(node.ty)
                        roots.append(node.ty)
    return roots


def annotate_program(program: Program, env: TypeEnv) -> AnnotatedProgram:
    """Build the game for every type used in the program and stamp each
    constructor/record occurrence with its node's priority."""
    game = assign_priorities(build_type_graph(stamp_roots(program), env), env)
    for group in program.def_groups:
        for clause in group.clauses:
            for node in clause_nodes(clause):
                if isinstance(node, (Ctor, Rec, PCtor, PRec)) and node.ty is not None:
                    node.prio = game.priority[node.ty]
    return AnnotatedProgram(program, game, env)


def _show_priority(p: Priority) -> str:
    return "inf" if p == INF else str(int(p))


def game_dot(game: ParityGame) -> str:
    """The game in Graphviz dot form, deterministically ordered."""
    lines = ["digraph game {"]
    for n in sorted(game.graph.nodes, key=format_type):
        name = format_type(n)
        lines.append(f'  "{name}" [label="{name} ^ {_show_priority(game.priority[n])}"];')
    for src, lab, dst in sorted(game.graph.edges, key=lambda e: (format_type(e[0]), e[1], format_type(e[2]))):
        lines.append(f'  "{format_type(src)}" -> "{format_type(dst)}" [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
