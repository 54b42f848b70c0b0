"""Command-line surface: run, explain, trace, an interactive breakpoint REPL,
and the HTTP session service.

Exit codes: 0 success, 2 query/usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import re
import sys
from fractions import Fraction
from pathlib import Path

from . import dataio, dsl
from .dataio import DataError, DatasetConfig
from .engine import EngineError, NotMaterialized, Session
from .expr import ExprError
from .explain import render_explain, render_tree
from .mining import MiningError, ResourceLimit
from .model import ModelError, NestedRelation, canonical_render, parse_type
from .optimizer import (
    Stats,
    apply_rewrites,
    choose_plan,
    enumerate_plans,
    reference_plan,
    stats_from_relation,
    with_costs,
)
from .params import InvalidValue, MiningParams, as_fraction
from .tree import QueryTree, TreeError, build_classic_tree

EXIT_OK = 0
EXIT_QUERY = 2
EXIT_DATA = 3

_QUERY_ERRORS = (dsl.SyntaxError_, TreeError, ExprError, InvalidValue, EngineError,
                 MiningError)
_DATA_ERRORS = (DataError, ModelError, OSError)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True,
                   help="CSV path, or synth:<transactions>x<items> with --seed")
    p.add_argument("--query-file", help="MINE RULE, CAQ, or query-spec file")
    p.add_argument("--template", choices=["classic", "minerule", "caq"])
    p.add_argument("--minsup", default="0.3")
    p.add_argument("--minconf", default="0.6")
    p.add_argument("--threshold-mode", choices=["strict", "inclusive"], default="strict")
    p.add_argument("--max-trans-items", type=int)
    p.add_argument("--head-card", help="lo..hi (minerule/caq)")
    p.add_argument("--body-card", help="lo..hi (minerule/caq)")
    p.add_argument("--breakpoints", help="comma-separated child->parent edges")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for synth: datasets; real runs are deterministic")
    p.add_argument("--tid-col", default="tid")
    p.add_argument("--item-col", default="item")
    p.add_argument("--columns", help="name:type,... full column declaration")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--max-plans", type=int, default=64)
    p.add_argument("--no-rewrite", action="store_true")
    p.add_argument("--ascii", action="store_true", help="ASCII operator names")


def _load_data(args) -> tuple[str, NestedRelation]:
    m = re.fullmatch(r"synth:(\d+)x(\d+)", args.data)
    if m:
        from .corpus import synth_relation

        rel = synth_relation(args.seed, int(m.group(1)), int(m.group(2)))
        return "Synth", rel
    path = Path(args.data)
    columns = None
    if args.columns:
        columns = tuple(
            (n, parse_type(t))
            for n, _, t in (c.partition(":") for c in args.columns.split(","))
        )
    cfg = DatasetConfig(
        path,
        tid_column=args.tid_col,
        item_column=args.item_col,
        columns=columns,
        delimiter=args.delimiter,
    )
    rel = dataio.load_transactions_csv(cfg)
    return path.stem.capitalize() or "Source", rel


def _parse_card(text: str | None) -> tuple[int, int | None] | None:
    if text is None:
        return None
    m = re.fullmatch(r"(\d+)(?:\.\.(\d+|n))?", text.strip())
    if not m:
        raise InvalidValue(f"bad cardinality range {text!r}")
    lo = int(m.group(1))
    hi = m.group(2)
    return (lo, lo) if hi is None else (lo, None if hi == "n" else int(hi))


def _build_tree(args, source: str) -> QueryTree:
    params = MiningParams(
        as_fraction(args.minsup), as_fraction(args.minconf),
        threshold_mode=args.threshold_mode,
    )
    if args.query_file:
        text = Path(args.query_file).read_text(encoding="utf-8")
        tree = dsl.load_query(text, params=params, source=source)
    else:
        template = args.template or "classic"
        if template == "classic":
            tree = build_classic_tree(source, params)
        elif template == "minerule":
            from .tree import build_mine_rule_tree

            tree = build_mine_rule_tree(
                source, params,
                max_trans_items=args.max_trans_items,
                head_card=_parse_card(args.head_card) or (1, None),
                body_card=_parse_card(args.body_card) or (1, None),
            )
        else:
            from .tree import CAQSpec, SideConstraints, build_caq_tree

            spec = CAQSpec(
                body=SideConstraints(*(_parse_card(args.body_card) or (1, None))),
                head=SideConstraints(*(_parse_card(args.head_card) or (1, None))),
            )
            tree = build_caq_tree(source, spec, params)
    if args.breakpoints:
        edges = []
        for part in filter(None, (p.strip() for p in args.breakpoints.split(","))):
            m = re.fullmatch(r"(\d+)\s*->\s*(\d+)", part)
            if not m:
                raise InvalidValue(f"bad breakpoint edge {part!r}")
            edges.append((int(m.group(1)), int(m.group(2))))
        tree = tree.with_breakpoints(edges)
    return tree


def _plan(args, tree: QueryTree, rel: NestedRelation):
    rewrite = apply_rewrites(tree, rules=() if args.no_rewrite else None)
    plans = enumerate_plans(rewrite.tree, max_plans=args.max_plans)
    stats = _stats(args, rel)
    chosen = choose_plan(plans, stats)
    return rewrite, plans, stats, chosen


def _stats(args, rel: NestedRelation) -> Stats:
    if getattr(args, "stats", None):
        n, m, w = (int(x) for x in args.stats.split(","))
        return Stats(n, m, w)
    return stats_from_relation(rel, args.tid_col, args.item_col)


def _emit(args, rel: NestedRelation) -> str:
    if args.format == "csv":
        return dataio.emit_csv(rel)
    if args.format == "json":
        import json

        return json.dumps(dataio.emit_json(rel), indent=2) + "\n"
    if args.format == "canonical":
        return canonical_render(rel)
    return dataio.emit_table(rel) + "\n"


def _write_out(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    source, rel = _load_data(args)
    tree = _build_tree(args, source)
    if tree.breakpoints:
        # explicit breakpoints want the stepwise plan: module-level
        # algorithms execute their span atomically and reject inner edges
        plan = reference_plan(tree)
    else:
        _, _, _, plan = _plan(args, tree, rel)
    session = Session(plan, {source: rel})
    report = session.run_until("end")
    while not report.done:
        report = session.resume()
    out = session.inspect(session.tree.root).relation
    _write_out(args, _emit(args, out))
    return EXIT_OK


def cmd_explain(args) -> int:
    source, rel = _load_data(args)
    tree = _build_tree(args, source)
    rewrite, plans, stats, chosen = _plan(args, tree, rel)
    text = render_explain(tree, rewrite, plans, stats, chosen, unicode_ok=not args.ascii)
    _write_out(args, text + "\n")
    return EXIT_OK


def cmd_trace(args) -> int:
    source, rel = _load_data(args)
    tree = _build_tree(args, source)
    plan = reference_plan(tree)  # every node materializes in trace mode
    session = Session(plan, {source: rel})
    report = session.run_until("end")
    while not report.done:
        report = session.resume()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for snap in session.trace():
        (out_dir / f"{snap.node}.snap").write_text(snap.render(), encoding="utf-8")
        step = session.tree.node(snap.node).step
        label = f" (step {step})" if step else ""
        print(f"node {snap.node}{label}: {snap.rows} rows -> {snap.node}.snap")
    return EXIT_OK


def cmd_repl(args) -> int:
    source, rel = _load_data(args)
    tree = _build_tree(args, source)
    session = Session(reference_plan(tree), {source: rel})
    print(render_tree(session.tree, unicode_ok=not args.ascii))
    print("commands: step | run-to N | show N | set minsup|minconf V | resume | quit")
    while True:
        try:
            line = input("mineral> ").strip()
        except EOFError:
            break
        if not line:
            continue
        try:
            if line == "quit":
                break
            elif line == "step":
                report = session.step()
                _print_report(report)
            elif line == "resume":
                _print_report(session.resume())
            elif line.startswith("run-to"):
                report = session.run_until(int(line.split()[1]))
                _print_report(report)
            elif line.startswith("show"):
                snap = session.inspect(int(line.split()[1]))
                print(dataio.emit_table(snap.relation))
            elif line.startswith("set"):
                _, name, value = line.split()
                inv = session.set_param(name, as_fraction(value))
                print(f"invalidated nodes: {list(inv.invalidated) or 'none'}")
            else:
                print(f"unknown command {line!r}")
        except NotMaterialized as e:
            print(f"not materialized: node {e.node}")
        except _QUERY_ERRORS + (ValueError, IndexError) as e:
            print(f"error: {e}")
    session.cancel()
    return EXIT_OK


def _print_report(report) -> None:
    for nid, rows in report.materialized:
        print(f"materialized node {nid}: {rows} rows")
    if report.paused_at:
        print(f"paused at breakpoint edge {report.paused_at}")
    if report.done:
        print("done")


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    host, _, port = args.listen.partition(":")
    allow = [Path(p) for p in (args.data_dir or [])]
    app = create_app(allowed_paths=allow, token=args.token, static_dir=args.static)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8776))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mineral",
        description="Association-rule mining as nested relational algebra query trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a mining query and print the rules")
    _add_common(p_run)
    p_run.add_argument("--out")
    p_run.add_argument("--format", choices=["table", "csv", "json", "canonical"],
                       default="table")
    p_run.set_defaults(func=cmd_run)

    p_explain = sub.add_parser("explain", help="show the tree, rewrites, and plan costs")
    _add_common(p_explain)
    p_explain.add_argument("--out")
    p_explain.add_argument("--stats", help="n,m,w synthetic statistics")
    p_explain.set_defaults(func=cmd_explain)

    p_trace = sub.add_parser("trace", help="run and write one snapshot file per node")
    _add_common(p_trace)
    p_trace.add_argument("--out-dir", default="trace")
    p_trace.set_defaults(func=cmd_trace)

    p_repl = sub.add_parser("repl", help="drive a session interactively")
    _add_common(p_repl)
    p_repl.set_defaults(func=cmd_repl)

    p_serve = sub.add_parser("serve", help="HTTP session service for the web UI")
    p_serve.add_argument("--listen", default="127.0.0.1:8776")
    p_serve.add_argument("--token", help="static API token")
    p_serve.add_argument("--data-dir", action="append",
                         help="directory allow-listed for dataset paths")
    p_serve.add_argument("--static", help="directory of built UI assets to serve")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except _QUERY_ERRORS as e:
        print(f"query error: {e}", file=sys.stderr)
        return EXIT_QUERY


if __name__ == "__main__":
    sys.exit(main())
