"""Command line interface.

`totcheck check FILE` prints one verdict line per definition group:
TOTAL, UNSAFE (with the reason), UNSAFE-BY-DEPENDENCY when the group relies
on something already unsafe, or ERROR when the group could not be checked
at all.  Exit code is 2 if anything errored, 1 if anything is unsafe and
0 otherwise.

`totcheck eval FILE EXPR` type-checks EXPR against the file and evaluates
it lazily up to a depth, on a fuel budget.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import callgraph, games, surface, typesys
from . import eval as evaluation

UNSAFE_VERDICTS = ("UNSAFE", "UNSAFE-BY-DEPENDENCY")


def _called_functions(group: surface.DefGroup) -> list[str]:
    seen: list[str] = []

    def walk(t):
        if isinstance(t, surface.Fun) and t.name not in seen:
            seen.append(t.name)
        elif isinstance(t, surface.Ctor):
            walk(t.arg)
        elif isinstance(t, surface.Rec):
            for _, u in t.fields:
                walk(u)
        elif isinstance(t, surface.App):
            walk(t.fn)
            walk(t.arg)

    for clause in group.clauses:
        walk(clause.body)
    return seen


class GroupStatus:
    def __init__(self, group: surface.DefGroup):
        self.group = group
        self.functions = group.functions
        self.verdict: str | None = None
        self.reason: str | None = None
        self.analysis: callgraph.GroupAnalysis | None = None


def analyze_source(src: str, B: int = 2, D: int = 2, max_edges: int = 100000, jobs: int = 1):
    """Full pipeline for one file.  Raises SourceError only for failures
    that poison the whole file (parsing, desugaring, type declarations);
    per-group failures are isolated into their verdicts."""
    program = surface.desugar(surface.parse_program(src))
    env = typesys.validate_type_decls(program)
    statuses = [GroupStatus(g) for g in program.def_groups]

    for st in statuses:
        try:
            typesys.infer_group(st.group, env)
            typesys.check_exhaustiveness_group(st.group, env)
            typesys.check_full_application_group(st.group, env)
        except typesys.HigherOrderError as e:
            st.verdict, st.reason = "UNSAFE", str(e)
        except surface.SourceError as e:
            st.verdict, st.reason = "ERROR", str(e)

    annotated = games.annotate_program(program, env)
    priorities = {p for p in annotated.game.priority.values() if p != games.INF}

    def analyze(st: GroupStatus):
        if st.verdict is not None:
            return
        try:
            st.analysis = callgraph.analyze_group(st.group, priorities, B, D, max_edges)
            st.verdict, st.reason = st.analysis.verdict, st.analysis.reason
        except callgraph.ResourceError as e:
            st.verdict, st.reason = "ERROR", str(e)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(analyze, statuses))
    else:
        for st in statuses:
            analyze(st)

    # a TOTAL group is only as good as the earlier groups it calls
    verdict_of: dict[str, str] = {}
    for st in statuses:
        if st.verdict == "TOTAL":
            for callee in _called_functions(st.group):
                if callee in st.functions:
                    continue
                if verdict_of.get(callee) in UNSAFE_VERDICTS:
                    st.verdict = "UNSAFE-BY-DEPENDENCY"
                    st.reason = f"calls {callee}"
                    break
        for f in st.functions:
            verdict_of[f] = st.verdict or "ERROR"
    return statuses, annotated


def _verdict_line(st: GroupStatus) -> str:
    names = ",".join(st.functions)
    if st.reason:
        return f"val {names}: {st.verdict} ({st.reason})"
    return f"val {names}: {st.verdict}"


def _exit_code(statuses) -> int:
    verdicts = [st.verdict for st in statuses]
    if any(v == "ERROR" for v in verdicts):
        return 2
    if any(v in UNSAFE_VERDICTS for v in verdicts):
        return 1
    return 0


def _callgraph_lines(st: GroupStatus) -> dict:
    names = ",".join(st.functions)
    out = {"functions": list(st.functions), "calls": [], "closure": []}
    if st.analysis is not None:
        out["calls"] = [callgraph.format_call(c) for c in st.analysis.calls]
        out["closure"] = sorted(callgraph.format_call(c) for c in st.analysis.closure)
    out["header"] = names
    return out


def run_check(args) -> int:
    try:
        src = Path(args.file).read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        statuses, annotated = analyze_source(
            src, B=args.bound_weight, D=args.bound_depth, max_edges=args.max_edges, jobs=args.jobs
        )
    except surface.SourceError as e:
        if args.json:
            print(json.dumps({"file": args.file, "error": str(e)}, indent=2))
        else:
            print(f"error: {e}", file=sys.stderr)
        return 2

    dot = games.game_dot(annotated.game)
    if args.show_game:
        Path(args.show_game).write_text(dot)

    if args.json:
        groups = []
        for st in statuses:
            entry: dict = {"functions": list(st.functions), "verdict": st.verdict}
            if st.reason:
                entry["reason"] = st.reason
            if st.analysis is not None and st.analysis.evidence is not None:
                entry["evidence_loop"] = callgraph.format_call(st.analysis.evidence)
            groups.append(entry)
        report = {
            "file": args.file,
            "bounds": {"weight": args.bound_weight, "depth": args.bound_depth},
            "groups": groups,
        }
        if args.show_game:
            report["game"] = dot
        if args.show_callgraph:
            report["callgraph"] = [_callgraph_lines(st) for st in statuses]
        print(json.dumps(report, indent=2))
    else:
        for st in statuses:
            print(_verdict_line(st))
        if args.show_callgraph:
            for st in statuses:
                info = _callgraph_lines(st)
                print(f"-- calls of {info['header']}")
                for line in info["calls"]:
                    print(line)
                print(f"-- closure of {info['header']}")
                for line in info["closure"]:
                    print(line)
    return _exit_code(statuses)


def run_eval(args) -> int:
    try:
        src = Path(args.file).read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        program = surface.desugar(surface.parse_program(src))
        env = typesys.validate_type_decls(program)
        typesys.infer_types(program, env)
        typesys.check_exhaustiveness(program, env)
        expr = surface.desugar_term(
            surface.parse_term(args.expr), program, {f for g in program.def_groups for f in g.functions}
        )
        typesys.infer_expr(expr, env)
    except surface.SourceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    defs = evaluation.Defs.from_program(program)
    fuel = evaluation.Fuel(args.fuel)
    try:
        value = evaluation.whnf(expr, {}, defs, fuel)
        tree = evaluation.force_depth(value, args.depth, defs, fuel)
    except evaluation.FuelExhausted:
        print("error: fuel ran out before a value emerged", file=sys.stderr)
        return 1
    except evaluation.MatchFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(evaluation.format_forced(tree))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="totcheck", description="totality checker and evaluator")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="run the totality analysis on a file")
    check.add_argument("file")
    check.add_argument("--json", action="store_true", help="machine-readable report")
    check.add_argument("--show-game", metavar="PATH", help="write the priority game as Graphviz dot")
    check.add_argument("--show-callgraph", action="store_true", help="dump calls and their closure")
    check.add_argument("--bound-weight", type=int, default=2, metavar="B", help="weight collapse bound")
    check.add_argument("--bound-depth", type=int, default=2, metavar="D", help="depth collapse bound")
    check.add_argument("--max-edges", type=int, default=100000, help="closure size budget")
    check.add_argument("--jobs", type=int, default=1, help="analyze groups in parallel")
    check.set_defaults(run=run_check)

    ev = sub.add_parser("eval", help="evaluate an expression against a file")
    ev.add_argument("file")
    ev.add_argument("expr")
    ev.add_argument("--depth", type=int, default=8, help="how deep to force the value")
    ev.add_argument("--fuel", type=int, default=1000000, help="evaluation step budget")
    ev.set_defaults(run=run_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.run(args)


if __name__ == "__main__":
    sys.exit(main())
