"""Command-line interface.

Exit codes: 0 success, 1 other failure (ingestion, constraints, evaluation),
2 usage, 3 query parse error, 4 query outside the supported fragments,
5 tuple budget exceeded, 6 disagreement with the oracle.
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from .baseline import naive_execute
from .catalog import Catalog, load_constraints, load_directory, load_edge_list, register_constraints
from .engine import make_plan, prepare, results_agree
from .errors import BudgetExceeded, EngineError, ParseError, PlanningError
from .executor import execute, format_value
from .jointree import render_dot, render_text
from .plan import Mode, build_plan, explain, explain_dot
from .workload import workload

EXIT_OK, EXIT_OTHER, EXIT_USAGE, EXIT_PARSE, EXIT_NOT_APPLICABLE, EXIT_BUDGET, EXIT_MISMATCH = \
    0, 1, 2, 3, 4, 5, 6


class NotApplicable(EngineError):
    pass


def _catalog(args) -> Catalog:
    catalog = load_directory(args.data) if args.data else Catalog()
    for path in getattr(args, "edges", None) or []:
        catalog = catalog.with_relation(load_edge_list(path, not args.undirected))
    fk = getattr(args, "fkpk", None)
    if fk:
        catalog = register_constraints(catalog, load_constraints(fk))
    return catalog


def _read_query(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _err(msg):
    print(msg, file=sys.stderr)


def _explain(prep, mode, constraints, out=None):
    out = out or sys.stderr
    print("-- join tree (rooted at the root guard)", file=out)
    print(render_text(prep.rooted), file=out)
    print(render_dot(prep.rooted), file=out)
    plan = build_plan(prep.query, prep.rooted, prep.classification, mode)
    print(f"-- logical plan ({mode.value})", file=out)
    print(explain(plan), file=out)
    print(explain_dot(plan), file=out)
    if constraints:
        final = make_plan(prep, mode, constraints)
        print(f"-- after FK/PK rewriting ({mode.value})", file=out)
        print(explain(final), file=out)
        print(explain_dot(final), file=out)


def _timed_runs(fn, reps: int, warmup: int):
    result = stats = None
    times = []
    for k in range(warmup + reps):
        result, stats = fn()
        if k >= warmup:
            times.append(stats.total_ms)
    return result, stats, times


def _run_mode(prep, catalog, mode, args):
    if mode is Mode.BASELINE:
        return lambda: naive_execute(prep.query, catalog, args.budget)
    if not prep.classification.applicable:
        raise NotApplicable(f"query is {prep.classification.label}")
    constraints = catalog.constraints if args.fkpk else None
    plan = make_plan(prep, mode, constraints)
    return lambda: execute(plan, catalog, mode, args.variant,
                           budget=args.budget if args.budget_all else None,
                           parallel=args.parallel)


def _agree_line(table) -> str:
    if len(table.rows) == 1:
        parts = [f"{c.upper()}={'NULL' if v is None else format_value(v)}"
                 for c, v in zip(table.columns, table.rows[0])]
        return "ALL MODES AGREE: " + ", ".join(parts)
    return f"ALL MODES AGREE: {len(table.rows)} rows"


def cmd_run(args) -> int:
    catalog = _catalog(args)
    prep = prepare(_read_query(args.query), catalog)
    modes = [Mode.parse(m) for m in (args.mode or ["guao-plus"])]
    constraints = catalog.constraints if args.fkpk else None
    if args.explain and prep.classification.applicable:
        for m in modes:
            if m is not Mode.BASELINE:
                _explain(prep, m, constraints)
    results, all_stats = {}, []
    for mode in modes:
        fn = _run_mode(prep, catalog, mode, args)
        table, stats, times = _timed_runs(fn, args.reps, args.warmup)
        results[mode] = table
        doc = stats.to_json()
        doc["runs"] = len(times)
        doc["mean_ms"] = statistics.fmean(times)
        doc["std_ms"] = statistics.pstdev(times) if len(times) > 1 else 0.0
        all_stats.append(doc)
    first = results[modes[0]]
    if args.output:
        Path(args.output).write_text(first.to_csv(), encoding="utf-8")
    else:
        sys.stdout.write(first.to_csv())
    if args.stats:
        payload = all_stats[0] if len(all_stats) == 1 else all_stats
        Path(args.stats).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    if args.compare_oracle:
        oracle = results.get(Mode.BASELINE)
        if oracle is None:
            oracle, _ = naive_execute(prep.query, catalog, args.budget)
        bad = [m.value for m, t in results.items() if not results_agree(t, oracle)]
        if bad:
            print(f"MISMATCH WITH ORACLE: {', '.join(bad)}")
            return EXIT_MISMATCH
        print(_agree_line(oracle))
    return EXIT_OK


def cmd_classify(args) -> int:
    catalog = _catalog(args)
    prep = prepare(_read_query(args.query), catalog)
    doc = prep.classification.to_json(prep.tree)
    doc["label"] = prep.classification.label
    print(json.dumps(doc, indent=2))
    if args.explain and prep.tree is not None:
        print(render_text(prep.tree), file=sys.stderr)
    return EXIT_OK


def cmd_load_check(args) -> int:
    catalog = _catalog(args)
    for name, rel in sorted(catalog.relations.items()):
        cols = ", ".join(f"{a}:{t.value}" for a, t in rel.schema)
        print(f"{name}: {rel.cardinality} rows ({cols})")
    c = catalog.constraints
    print(f"constraints: {len(c.unique)} unique, {len(c.foreign_keys)} foreign keys")
    return EXIT_OK


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sizes = args.size or [1]
    for size in sizes:
        if size < 1:
            raise ValueError("size must be at least 1")
        for name, sql in workload(args.kind, size).items():
            (out / name).write_text(sql, encoding="utf-8")
            print(out / name)
    return EXIT_OK


def cmd_bench(args) -> int:
    catalog = _catalog(args)
    modes = [Mode.parse(m) for m in (args.mode or ["baseline", "guao", "guao-plus"])]
    lines = ["query,mode,status,mean_ms,std_ms,peak_materialised_tuples,result"]
    for qfile in args.queries:
        try:
            prep = prepare(_read_query(qfile), catalog)
        except ParseError as exc:
            lines.append(f"{Path(qfile).name},-,parse-error,,,,\"{exc}\"")
            continue
        for mode in modes:
            try:
                fn = _run_mode(prep, catalog, mode, args)
                table, stats, times = _timed_runs(fn, args.reps, args.warmup)
            except BudgetExceeded:
                lines.append(f"{Path(qfile).name},{mode.value},budget-exceeded,,,,")
                continue
            except NotApplicable:
                lines.append(f"{Path(qfile).name},{mode.value},not-applicable,,,,")
                continue
            mean = statistics.fmean(times)
            std = statistics.pstdev(times) if len(times) > 1 else 0.0
            value = ";".join(format_value(v) for v in table.rows[0]) if len(table.rows) == 1 \
                else f"{len(table.rows)} rows"
            lines.append(f"{Path(qfile).name},{mode.value},ok,{mean:.3f},{std:.3f},"
                         f"{stats.peak_materialised_tuples},{value}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _non_negative(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must not be negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="guardagg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp):
        sp.add_argument("--data", help="data directory (CSV files, edge lists, schema.json)")
        sp.add_argument("--edges", action="append", help="extra edge-list file loaded as 'edge'")
        sp.add_argument("--undirected", action="store_true", help="load --edges symmetrically")
        sp.add_argument("--fkpk", metavar="FILE", help="constraints file to register and exploit")

    def exec_args(sp):
        sp.add_argument("--mode", action="append", choices=[m.value for m in Mode],
                        help="evaluation mode; repeat to run several (default guao-plus)")
        sp.add_argument("--variant", choices=["hash", "merge"], default="hash")
        sp.add_argument("--budget", type=_positive, default=10 ** 7,
                        help="tuple budget of the baseline (default 10^7)")
        sp.add_argument("--budget-all", action="store_true",
                        help="also enforce the budget on joins of the guao mode")
        sp.add_argument("--reps", type=_positive, default=1)
        sp.add_argument("--warmup", type=_non_negative, default=0)
        sp.add_argument("--parallel", action="store_true",
                        help="evaluate sibling subplans on separate threads")

    sp = sub.add_parser("load-check", help="load a data directory and report its relations")
    data_args(sp)
    sp.set_defaults(func=cmd_load_check)

    sp = sub.add_parser("classify", help="report the fragment a query belongs to")
    sp.add_argument("--query", required=True)
    data_args(sp)
    sp.add_argument("--explain", action="store_true")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("run", help="evaluate a query")
    sp.add_argument("--query", required=True)
    data_args(sp)
    exec_args(sp)
    sp.add_argument("--explain", action="store_true", help="print join tree and plans to stderr")
    sp.add_argument("--stats", metavar="FILE", help="write execution statistics as JSON")
    sp.add_argument("--output", metavar="FILE", help="write the result CSV here, not to stdout")
    sp.add_argument("--compare-oracle", action="store_true",
                    help="check every mode against the naive evaluation")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("generate", help="write path or tree COUNT(*) queries")
    sp.add_argument("--kind", choices=["path", "tree"], required=True)
    sp.add_argument("--size", type=int, action="append", help="join count (path) or index (tree)")
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("bench", help="time queries in several modes")
    sp.add_argument("queries", nargs="+")
    data_args(sp)
    exec_args(sp)
    sp.add_argument("--out", metavar="FILE", help="also write the CSV report here")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ParseError as exc:
        _err(f"parse error: {exc}")
        return EXIT_PARSE
    except (NotApplicable, PlanningError) as exc:
        _err(f"not applicable: {exc}")
        return EXIT_NOT_APPLICABLE
    except BudgetExceeded as exc:
        _err(f"budget exceeded: {exc}")
        return EXIT_BUDGET
    except (EngineError, OSError, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
