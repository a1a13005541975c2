"""Physical evaluation of logical plans.

Relations flowing between operators are :class:`ExecRelation` objects: a
tuple of column names plus a list of row tuples.  Frequencies and COUNT
columns use checked unsigned 64-bit arithmetic, integer SUM columns checked
signed 64-bit arithmetic; floats are left to IEEE double precision.  NULL
(``None``) join keys never match.  In a SUM-style aggregate column NULL acts
as an absorbing zero (``NULL * k = NULL``, ``NULL + x = x``), so a group whose
values are all NULL ends up NULL as SQL requires.
"""
from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .catalog import INT64_MAX, INT64_MIN, Catalog
from .errors import ArithmeticOverflow, BudgetExceeded, EvaluationError, PlanningError
from .expr import compile_expr, compile_predicates
from .plan import (AggCol, AggInit, AggJoin, FinalAggregate, FinalSpec, Filter, FreqInit,
                   GroupSum, Join, PlanNode, Project, Scan, SemiJoin, join_right_columns, walk)

U64_MAX = 2 ** 64 - 1


@dataclass
class ExecRelation:
    columns: tuple[str, ...]
    rows: list
    origin: int | None = None

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self._index = {c: i for i, c in enumerate(self.columns)}

    @property
    def index(self) -> dict[str, int]:
        return self._index

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        i = self._index[name]
        return [r[i] for r in self.rows]

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


@dataclass
class OpStat:
    id: int
    op: str
    out_rows: int
    ms: float
    materialised: bool = True
    in_rows: int | None = None


@dataclass
class ExecStats:
    mode: str = ""
    variant: str = "hash"
    operators: list[OpStat] = field(default_factory=list)
    total_ms: float = 0.0
    outputs: dict = field(default_factory=dict, repr=False)

    @property
    def peak_materialised_tuples(self) -> int:
        return max((o.out_rows for o in self.operators if o.materialised), default=0)

    @property
    def aggjoin_monotone(self) -> bool:
        """Every AggJoin emitted at most as many tuples as its left input."""
        return all(o.out_rows <= o.in_rows for o in self.operators
                   if o.op == "AggJoin" and o.in_rows is not None)

    def op_counts(self, op: str) -> list[int]:
        return [o.out_rows for o in self.operators if o.op == op]

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "variant": self.variant,
            "total_ms": round(self.total_ms, 3),
            "operators": [{"id": o.id, "op": o.op, "out_rows": o.out_rows, "ms": round(o.ms, 3)}
                          for o in self.operators],
            "peak_materialised_tuples": self.peak_materialised_tuples,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list

    def __post_init__(self):
        self.columns = tuple(self.columns)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def scalar(self):
        if len(self.rows) != 1 or len(self.columns) != 1:
            raise ValueError("result is not a single value")
        return self.rows[0][0]

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def to_csv(self) -> str:
        import csv
        import io
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for r in self.rows:
            writer.writerow(["" if v is None else format_value(v) for v in r])
        return buf.getvalue()


def format_value(v) -> str:
    if isinstance(v, float) and v.is_integer() and abs(v) < 2 ** 53:
        return str(int(v))
    return str(v)


# -- checked arithmetic ------------------------------------------------------------

def checked(v, bound: str, op: str):
    if isinstance(v, int) and not isinstance(v, bool):
        if bound == "u64":
            if v < 0 or v > U64_MAX:
                raise ArithmeticOverflow(op, f"value {v} outside unsigned 64-bit range")
        elif v < INT64_MIN or v > INT64_MAX:
            raise ArithmeticOverflow(op, f"value {v} outside signed 64-bit range")
    return v


def _mul(a, b, bound, op):
    if a is None or b is None:
        return None
    return checked(a * b, bound, op)


def _add(a, b, bound, op):
    if a is None:
        return b
    if b is None:
        return a
    return checked(a + b, bound, op)


def _min(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return b if b < a else a


def _max(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return b if b > a else a


def _combiner(col: AggCol, op: str):
    if col.combine == "SUM":
        return lambda a, b: _add(a, b, col.bound, op)
    if col.combine == "MIN":
        return _min
    if col.combine == "MAX":
        return _max
    raise PlanningError(f"unknown combine function {col.combine}")


def _sort_key(v):
    if v is None:
        return (2, 0)
    if isinstance(v, str):
        return (1, v)
    return (0, v)


def _key_getter(positions):
    if len(positions) == 1:
        p = positions[0]
        return lambda row: (row[p],)
    return lambda row: tuple(row[p] for p in positions)


# -- operators ---------------------------------------------------------------------

def scan(catalog: Catalog, node: Scan) -> ExecRelation:
    rel = catalog[node.relation]
    positions = [rel.index(a) for a, _ in node.columns]
    out_cols, picks, equal = [], [], []
    for pos, (_, v) in zip(positions, node.columns):
        if v in out_cols:
            equal.append((picks[out_cols.index(v)], pos))
        else:
            out_cols.append(v)
            picks.append(pos)
    rows = rel.rows
    if equal:
        rows = [r for r in rows if all(r[a] is not None and r[a] == r[b] for a, b in equal)]
    if picks == list(range(len(rel.schema))):
        out = list(rows)
    else:
        out = [tuple(r[p] for p in picks) for r in rows]
    return ExecRelation(tuple(out_cols), out)


def filter_rows(rel: ExecRelation, predicates) -> ExecRelation:
    if not predicates:
        return ExecRelation(rel.columns, list(rel.rows))
    keep = compile_predicates(predicates, rel.index)
    return ExecRelation(rel.columns, [r for r in rel.rows if keep(r)])


def project(rel: ExecRelation, items) -> ExecRelation:
    idx = rel.index
    fns = []
    for out, op, args in items:
        pos = [idx[a] for a in args]
        if op == "copy":
            fns.append(lambda r, p=pos[0]: r[p])
        elif op == "freq":
            fns.append(lambda r, a=pos[0], b=pos[1], o=out: checked(r[a] * r[b], "u64", "Project"))
        elif op in ("mul", "mul_u64"):
            bound = "u64" if op == "mul_u64" else "i64"
            fns.append(lambda r, a=pos[0], b=pos[1], k=bound: _mul(r[a], r[b], k, "Project"))
        elif op == "min":
            fns.append(lambda r, a=pos[0], b=pos[1]: _min(r[a], r[b]))
        elif op == "max":
            fns.append(lambda r, a=pos[0], b=pos[1]: _max(r[a], r[b]))
        else:
            raise PlanningError(f"unknown projection op {op}")
    return ExecRelation(tuple(i[0] for i in items), [tuple(f(r) for f in fns) for r in rel.rows])


def init_freq_and_aggs(rel: ExecRelation, inits=()) -> ExecRelation:
    """Append ``c = 1`` and initial aggregate columns.

    At an aggregate's guard the column starts as the value of its expression
    (MIN/MAX/SUM) or as 1/0 depending on whether that value is non-NULL
    (COUNT); at strict ancestors SUM/COUNT columns start at 1 and MIN/MAX
    columns at NULL, the identity of the None-aware MIN/MAX."""
    fns = []
    for init in inits:
        if init.kind == "value":
            fns.append(compile_expr(init.expr, rel.index))
        elif init.kind == "count":
            f = compile_expr(init.expr, rel.index)
            fns.append(lambda r, f=f: 0 if f(r) is None else 1)
        elif init.kind == "one":
            fns.append(lambda r: 1)
        else:
            fns.append(lambda r: None)
    cols = rel.columns + ("c",) + tuple(i.column for i in inits)
    if not fns:
        rows = [r + (1,) for r in rel.rows]
    else:
        rows = [r + (1,) + tuple(f(r) for f in fns) for r in rel.rows]
    return ExecRelation(cols, rows)


def semi_join(R: ExecRelation, S: ExecRelation, on) -> ExecRelation:
    rk = _key_getter([R.index[v] for v in on])
    sk = _key_getter([S.index[v] for v in on])
    keys = {k for k in map(sk, S.rows) if None not in k}
    return ExecRelation(R.columns, [r for r in R.rows if rk(r) in keys])


def hash_join(R: ExecRelation, S: ExecRelation, on, budget: int | None = None) -> ExecRelation:
    rk = _key_getter([R.index[v] for v in on])
    sk = _key_getter([S.index[v] for v in on])
    rest = [i for i, c in enumerate(S.columns) if c not in on]
    table: dict = {}
    for s in S.rows:
        k = sk(s)
        if None in k:
            continue
        table.setdefault(k, []).append(tuple(s[i] for i in rest))
    if budget is not None:
        size = sum(len(table.get(rk(r), ())) for r in R.rows)
        if size > budget:
            raise BudgetExceeded("Join", size, budget)
    out = []
    for r in R.rows:
        for s in table.get(rk(r), ()):
            out.append(r + s)
    return ExecRelation(R.columns + join_right_columns(R.columns, S.columns, on), out)


class _GroupState:
    """Per join-key summary of an S-side relation: sc and the I_S values."""
    __slots__ = ("sc", "vals")

    def __init__(self, n):
        self.sc = 0
        self.vals = [None] * n


def _summarise(rows, S: ExecRelation, i_s, op):
    c = S.index["c"]
    pos = [S.index[col.name] for col in i_s]
    comb = [_combiner(col, op) for col in i_s]
    st = _GroupState(len(i_s))
    for s in rows:
        st.sc = checked(st.sc + s[c], "u64", op)
        for k, p in enumerate(pos):
            st.vals[k] = comb[k](st.vals[k], s[p])
    return st


def _emit(r, st: _GroupState, rc, rs_pos, i_s, ri_pos, i_r, op):
    row = list(r)
    row[rc] = checked(row[rc] * st.sc, "u64", op)
    for k, (p, col) in enumerate(zip(rs_pos, i_s)):
        if col.combine == "SUM":
            row[p] = _mul(row[p], st.vals[k], col.bound, op)
        elif col.combine == "MIN":
            row[p] = _min(row[p], st.vals[k])
        else:
            row[p] = _max(row[p], st.vals[k])
    for p, col in zip(ri_pos, i_r):
        if col.combine == "SUM":
            row[p] = _mul(row[p], st.sc, col.bound, op)
    return tuple(row)


def agg_hash_join(R: ExecRelation, S: ExecRelation, on, i_s=(), i_r=()) -> ExecRelation:
    """Semi-join of R with S that folds S's frequencies and propagated
    aggregates into R's columns; the output keeps R's schema."""
    op = "AggJoin[hash]"
    rk = _key_getter([R.index[v] for v in on])
    sk = _key_getter([S.index[v] for v in on])
    groups: dict = {}
    for s in S.rows:
        k = sk(s)
        if None not in k:
            groups.setdefault(k, []).append(s)
    summary = {k: _summarise(rows, S, i_s, op) for k, rows in groups.items()}
    rc = R.index["c"]
    rs_pos = [R.index[col.name] for col in i_s]
    ri_pos = [R.index[col.name] for col in i_r]
    out = []
    for r in R.rows:
        st = summary.get(rk(r))
        if st is not None:
            out.append(_emit(r, st, rc, rs_pos, i_s, ri_pos, i_r, op))
    return ExecRelation(R.columns, out)


def agg_merge_join(R: ExecRelation, S: ExecRelation, on, i_s=(), i_r=()) -> ExecRelation:
    """Sort-merge variant of :func:`agg_hash_join`; rows come out in R's key
    order (stable within equal keys)."""
    op = "AggJoin[merge]"
    rk = _key_getter([R.index[v] for v in on])
    sk = _key_getter([S.index[v] for v in on])

    def order(k):
        return tuple(_sort_key(v) for v in k)
    rs = sorted(((order(k), r) for r in R.rows if None not in (k := rk(r))), key=lambda t: t[0])
    ss = sorted(((order(k), s) for s in S.rows if None not in (k := sk(s))), key=lambda t: t[0])
    rc = R.index["c"]
    rs_pos = [R.index[col.name] for col in i_s]
    ri_pos = [R.index[col.name] for col in i_r]
    out = []
    i = j = 0
    while i < len(rs) and j < len(ss):
        kr, ks = rs[i][0], ss[j][0]
        if kr < ks:
            i += 1
        elif ks < kr:
            j += 1
        else:
            j2 = j
            while j2 < len(ss) and ss[j2][0] == kr:
                j2 += 1
            st = _summarise((s for _, s in ss[j:j2]), S, i_s, op)
            while i < len(rs) and rs[i][0] == kr:
                out.append(_emit(rs[i][1], st, rc, rs_pos, i_s, ri_pos, i_r, op))
                i += 1
            j = j2
    return ExecRelation(R.columns, out)


def group_sum_aggregate(rel: ExecRelation, group, combine=()) -> ExecRelation:
    """One row per distinct value of ``group`` (NULL is a value here), each
    column in ``combine`` merged by its combine function."""
    gk = _key_getter([rel.index[g] for g in group]) if group else (lambda r: ())
    pos = [rel.index[c.name] for c in combine]
    comb = [_combiner(c, "GroupSum") for c in combine]
    acc: dict = {}
    for r in rel.rows:
        k = gk(r)
        cur = acc.get(k)
        if cur is None:
            acc[k] = [r[p] for p in pos]
        else:
            for n, p in enumerate(pos):
                cur[n] = comb[n](cur[n], r[p])
    return ExecRelation(tuple(group) + tuple(c.name for c in combine),
                        [k + tuple(v) for k, v in acc.items()])


# -- final aggregation -------------------------------------------------------------

def _exact(v):
    return Fraction(v) if isinstance(v, float) else v


def weighted_percentile(pairs, p: float):
    """PERCENTILE_CONT over the multiset in which each value occurs with the
    given weight, computed without expanding it."""
    if not 0.0 <= p <= 1.0:
        raise EvaluationError(f"percentile fraction {p} outside [0, 1]")
    counts: dict = {}
    for v, w in pairs:
        if v is not None and w:
            counts[v] = counts.get(v, 0) + w
    if not counts:
        return None
    values = sorted(counts)
    total = sum(counts.values())
    h = p * (total - 1)
    lo = math.floor(h)
    frac = h - lo
    hi = lo + 1 if frac > 0 else lo

    def at(k):
        seen = 0
        for v in values:
            seen += counts[v]
            if k < seen:
                return v
        return values[-1]
    a = at(lo)
    if frac == 0:
        return a
    b = at(hi)
    if a == b:
        return a
    return a + frac * (b - a)


def _moments(pairs):
    n = s1 = s2 = 0
    for v, w in pairs:
        if v is None or not w:
            continue
        x = _exact(v)
        n += w
        s1 += w * x
        s2 += w * x * x
    return n, s1, s2


def weighted_variance(pairs, sample=False):
    n, s1, s2 = _moments(pairs)
    if n == 0 or (sample and n < 2):
        return None
    num = Fraction(n * s2 - s1 * s1)
    return float(num / (n * (n - 1) if sample else n * n))


def weighted_corr(triples):
    n = sx = sy = sxx = syy = sxy = 0
    for x, y, w in triples:
        if x is None or y is None or not w:
            continue
        x, y = _exact(x), _exact(y)
        n += w
        sx += w * x
        sy += w * y
        sxx += w * x * x
        syy += w * y * y
        sxy += w * x * y
    if n < 2:
        return None
    cov = n * sxy - sx * sy
    vx = n * sxx - sx * sx
    vy = n * syy - sy * sy
    if vx == 0 or vy == 0:
        return None
    return float(cov) / (math.sqrt(float(vx)) * math.sqrt(float(vy)))


def _none_sum(values, bound, op):
    total = None
    for v in values:
        total = _add(total, v, bound, op)
    return total


def _evaluate(spec: FinalSpec, rows, index):
    f = spec.func
    op = f"FinalAggregate:{spec.name}"
    if f.startswith("AGG_"):
        cols = [index[c] for c in spec.columns]
        vals = [r[cols[0]] for r in rows]
        if f == "AGG_MIN":
            return min((v for v in vals if v is not None), default=None)
        if f == "AGG_MAX":
            return max((v for v in vals if v is not None), default=None)
        if f == "AGG_SUM":
            return _none_sum(vals, "i64", op)
        if f == "AGG_COUNT":
            return _none_sum(vals, "u64", op) or 0
        total = _none_sum(vals, "i64", op)
        cnt = _none_sum((r[cols[1]] for r in rows), "u64", op) or 0
        return None if not cnt or total is None else total / cnt
    w = index[spec.weight] if spec.weight is not None else None
    weight = (lambda r: r[w]) if w is not None else (lambda r: 1)
    if f == "COUNT_STAR":
        return checked(sum(weight(r) for r in rows), "u64", op)
    fns = [compile_expr(a, index) for a in spec.args]
    if f == "CORR":
        return weighted_corr((fns[0](r), fns[1](r), weight(r)) for r in rows)
    pairs = [(fns[0](r), weight(r)) for r in rows]
    present = [(v, c) for v, c in pairs if v is not None]
    if f == "MIN":
        return min((v for v, _ in present), default=None)
    if f == "MAX":
        return max((v for v, _ in present), default=None)
    if f == "COUNT_DISTINCT":
        return len({v for v, _ in present})
    if f == "COUNT":
        return checked(sum(c for _, c in present), "u64", op)
    if f == "SUM":
        if not present:
            return None
        return checked(sum(v * c for v, c in present), "i64", op)
    if f == "AVG":
        if not present:
            return None
        total = checked(sum(v * c for v, c in present), "i64", op)
        return total / sum(c for _, c in present)
    if f == "MEDIAN":
        return weighted_percentile(present, 0.5)
    if f == "PERCENTILE":
        return weighted_percentile(present, spec.fraction)
    if f == "VARIANCE":
        return weighted_variance(present, spec.sample)
    if f == "STDDEV":
        var = weighted_variance(present, spec.sample)
        return None if var is None else math.sqrt(var)
    raise PlanningError(f"unknown final aggregate {f}")


def group_order_key(key):
    return tuple(_sort_key(v) for v in key)


def final_aggregate(rel: ExecRelation, specs, group_by=(), select=()) -> ResultTable:
    gk = _key_getter([rel.index[g] for g in group_by]) if group_by else (lambda r: ())
    groups: dict = {}
    for r in rel.rows:
        groups.setdefault(gk(r), []).append(r)
    if not group_by and not groups:
        groups[()] = []
    if not select:
        select = tuple(("agg", j, s.name) for j, s in enumerate(specs))
    out = []
    for key in sorted(groups, key=group_order_key):
        vals = [_evaluate(s, groups[key], rel.index) for s in specs]
        out.append(tuple(key[i] if kind == "group" else vals[i] for kind, i, _ in select))
    return ResultTable(tuple(name for _, _, name in select), out)


# -- plan driver -------------------------------------------------------------------

def _mode_of(plan: PlanNode) -> str:
    nodes = list(walk(plan))
    if any(isinstance(n, AggJoin) for n in nodes):
        return "guao-plus"
    if any(isinstance(n, Join) for n in nodes):
        return "guao"
    return "semijoin"


def execute(plan: FinalAggregate, catalog: Catalog, mode=None, variant: str = "hash",
            budget: int | None = None, parallel: bool = False, capture: bool = False):
    """Run ``plan``; returns ``(ResultTable, ExecStats)``.

    ``parallel`` evaluates the two inputs of binary operators on separate
    threads; operator ids follow post-order regardless, so statistics and
    results are identical to the sequential run.  With ``capture`` every
    operator output is kept in ``stats.outputs`` keyed by operator id."""
    if variant not in ("hash", "merge"):
        raise ValueError(f"unknown join variant {variant!r}")
    mode_name = getattr(mode, "value", mode) or _mode_of(plan)
    stats = ExecStats(mode=mode_name, variant=variant)
    ids = {id(n): k for k, n in enumerate(walk(plan))}
    lock = threading.Lock()

    def record(node, rel, t0, in_rows=None):
        ms = (time.perf_counter() - t0) * 1000.0
        nid = ids[id(node)]
        rel.origin = nid
        with lock:
            stats.operators.append(OpStat(nid, node.op, len(rel), ms,
                                          not isinstance(node, Scan), in_rows))
            if capture:
                stats.outputs[nid] = rel
        return rel

    def pair(node):
        if not parallel:
            return run(node.left), run(node.right)
        box: dict = {}

        def side():
            try:
                box["value"] = run(node.right)
            except BaseException as exc:  # re-raised in the calling thread
                box["error"] = exc
        worker = threading.Thread(target=side)
        worker.start()
        try:
            left = run(node.left)
        finally:
            worker.join()
        if "error" in box:
            raise box["error"]
        return left, box["value"]

    def run(node) -> ExecRelation:
        if isinstance(node, Scan):
            t0 = time.perf_counter()
            return record(node, scan(catalog, node), t0)
        if isinstance(node, (Join, SemiJoin, AggJoin)):
            left, right = pair(node)
            t0 = time.perf_counter()
            if isinstance(node, Join):
                out = hash_join(left, right, node.on, budget)
            elif isinstance(node, SemiJoin):
                out = semi_join(left, right, node.on)
            elif variant == "merge":
                out = agg_merge_join(left, right, node.on, node.i_s, node.i_r)
            else:
                out = agg_hash_join(left, right, node.on, node.i_s, node.i_r)
            return record(node, out, t0, len(left))
        child = run(node.child)
        t0 = time.perf_counter()
        if isinstance(node, Filter):
            out = filter_rows(child, node.predicates)
        elif isinstance(node, Project):
            out = project(child, node.items)
        elif isinstance(node, FreqInit):
            out = init_freq_and_aggs(child, node.inits)
        elif isinstance(node, GroupSum):
            out = group_sum_aggregate(child, node.group, node.combine)
        elif isinstance(node, FinalAggregate):
            table = final_aggregate(child, node.specs, node.group_by, node.select)
            record(node, ExecRelation(table.columns, table.rows), t0, len(child))
            return table
        else:
            raise PlanningError(f"cannot execute {node!r}")
        return record(node, out, t0, len(child))

    start = time.perf_counter()
    if not isinstance(plan, FinalAggregate):
        raise PlanningError("plan root must be a FinalAggregate")
    result = run(plan)
    stats.total_ms = (time.perf_counter() - start) * 1000.0
    stats.operators.sort(key=lambda o: o.id)
    return result, stats
