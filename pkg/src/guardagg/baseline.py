"""Reference evaluation: materialise the whole join, then aggregate.

Atoms are joined left-deep in query order with plain hash joins (a Cartesian
product when an atom shares no condition with its predecessors), local
predicates applied at the scans.  Aggregates are then computed over the
materialised rows with textbook routines (``statistics``, ``numpy``), sharing
no code with the executor's weighted aggregation.
"""
from __future__ import annotations

import math
import statistics
import time
from collections import defaultdict

import numpy as np

from .catalog import Catalog
from .errors import BudgetExceeded
from .executor import ExecStats, OpStat, ResultTable, group_order_key
from .expr import Column, compile_expr, compile_predicates
from .query import AggFunc, Query


def _needed_columns(query: Query, upto: int) -> set:
    """Columns of atoms < ``upto`` still referenced by later joins or by the
    output."""
    later = {a.alias for a in query.atoms[upto:]}
    need = set()
    for j in query.joins:
        if j.left.atom in later or j.right.atom in later:
            need.add((j.left.atom, j.left.name))
            need.add((j.right.atom, j.right.name))
    for g in query.group_by:
        need.add((g.atom, g.name))
    for agg in query.aggregates:
        for c in agg.columns:
            need.add((c.atom, c.name))
    return need


def naive_join(query: Query, catalog: Catalog, budget: int | None = None, stats=None):
    """Materialise the full join; returns (column list, rows)."""
    cols: list = []
    rows: list = [()]
    for k, atom in enumerate(query.atoms):
        t0 = time.perf_counter()
        rel = catalog[atom.relation]
        index = {(atom.alias, a): i for i, a in enumerate(rel.attributes)}
        keep = compile_predicates(atom.predicates, {p.ref: index[(p.ref.atom, p.ref.name)]
                                                     for p in atom.predicates})
        base = [r for r in rel.rows if keep(r)]
        if stats is not None:
            stats.operators.append(OpStat(len(stats.operators), f"Scan {atom.alias}", len(base),
                                          (time.perf_counter() - t0) * 1000))
        t0 = time.perf_counter()
        done = {a.alias for a in query.atoms[:k]}
        pairs = []   # (position in cols, position in atom)
        for j in query.joins:
            for here, there in ((j.left, j.right), (j.right, j.left)):
                if here.atom == atom.alias and there.atom in done:
                    pairs.append((cols.index((there.atom, there.name)),
                                  index[(here.atom, here.name)]))
        need = _needed_columns(query, k + 1)
        left_keep = [i for i, c in enumerate(cols) if c in need]
        right_keep = [i for a, i in index.items() if a in need]
        table = defaultdict(list)
        for r in base:
            key = tuple(r[p] for _, p in pairs)
            if None not in key:
                table[key].append(tuple(r[i] for i in right_keep))
        size = 0
        for row in rows:
            key = tuple(row[p] for p, _ in pairs)
            size += len(table.get(key, ()))
        if budget is not None and size > budget:
            raise BudgetExceeded(f"Join {atom.alias}", size, budget)
        out = []
        for row in rows:
            key = tuple(row[p] for p, _ in pairs)
            part = table.get(key)
            if part:
                head = tuple(row[i] for i in left_keep)
                out.extend(head + t for t in part)
        cols = [cols[i] for i in left_keep] + [c for c, i in index.items() if i in right_keep]
        # dict order of ``index`` follows attribute order, matching right_keep
        rows = out
        if stats is not None:
            stats.operators.append(OpStat(len(stats.operators), f"Join {atom.alias}", len(rows),
                                          (time.perf_counter() - t0) * 1000))
    return cols, rows


def _aggregate(func: AggFunc, values, fraction=None, sample=False):
    if func is AggFunc.COUNT_STAR:
        return len(values)
    if func is AggFunc.CORR:
        pts = [(x, y) for x, y in values if x is not None and y is not None]
        if len(pts) < 2:
            return None
        try:
            return statistics.correlation([p[0] for p in pts], [p[1] for p in pts])
        except statistics.StatisticsError:
            return None
    vals = [v for v in values if v is not None]
    if func is AggFunc.COUNT:
        return len(vals)
    if func is AggFunc.COUNT_DISTINCT:
        return len(set(vals))
    if not vals:
        return None
    if func is AggFunc.SUM:
        return sum(vals)
    if func is AggFunc.AVG:
        return sum(vals) / len(vals)
    if func is AggFunc.MIN:
        return min(vals)
    if func is AggFunc.MAX:
        return max(vals)
    if func is AggFunc.MEDIAN:
        return statistics.median(vals)
    if func is AggFunc.PERCENTILE:
        return float(np.percentile(np.asarray(vals, dtype=float), fraction * 100.0))
    if func in (AggFunc.VARIANCE, AggFunc.STDDEV):
        if sample:
            if len(vals) < 2:
                return None
            var = statistics.variance(vals)
        else:
            var = statistics.pvariance(vals)
        return math.sqrt(var) if func is AggFunc.STDDEV else float(var)
    raise ValueError(f"unsupported aggregate {func}")


def naive_execute(query: Query, catalog: Catalog, tuple_budget: int | None = 10 ** 7):
    """Evaluate ``query`` by brute force; returns ``(ResultTable, ExecStats)``."""
    if tuple_budget is not None and tuple_budget < 1:
        raise ValueError("tuple budget must be positive")
    stats = ExecStats(mode="baseline", variant="hash")
    start = time.perf_counter()
    cols, rows = naive_join(query, catalog, tuple_budget, stats)
    t0 = time.perf_counter()
    index = {Column(*c): i for i, c in enumerate(cols)}
    gpos = [index[g] for g in query.group_by]
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[p] for p in gpos), []).append(r)
    if not query.group_by and not groups:
        groups[()] = []
    fns = []
    for agg in query.aggregates:
        fs = [compile_expr(a, index) for a in agg.args]
        if agg.func is AggFunc.CORR:
            fns.append(lambda r, fs=fs: (fs[0](r), fs[1](r)))
        elif fs:
            fns.append(fs[0])
        else:
            fns.append(lambda r: 1)
    out = []
    for key in sorted(groups, key=group_order_key):
        members = groups[key]
        vals = [_aggregate(agg.func, [f(r) for r in members], agg.fraction, agg.sample)
                for agg, f in zip(query.aggregates, fns)]
        out.append(tuple(key[s.index] if s.kind == "group" else vals[s.index]
                         for s in query.select))
    stats.operators.append(OpStat(len(stats.operators), "Aggregate", len(out),
                                  (time.perf_counter() - t0) * 1000))
    stats.total_ms = (time.perf_counter() - start) * 1000.0
    return ResultTable(query.output_names, out), stats


def join_cardinality(query: Query, catalog: Catalog, budget: int | None = None) -> int:
    return len(naive_join(query, catalog, budget)[1])


def walk_count(edges, length: int) -> int:
    """Number of directed walks with ``length`` edges, by dynamic programming
    over the edge list (exact integers)."""
    if length < 1:
        raise ValueError("walk length must be at least 1")
    ends: dict = defaultdict(int)
    for u, v in edges:
        if u is not None and v is not None:
            ends[v] += 1
    for _ in range(length - 1):
        nxt: dict = defaultdict(int)
        for u, v in edges:
            if u is not None and v is not None and u in ends:
                nxt[v] += ends[u]
        ends = nxt
    return sum(ends.values())
