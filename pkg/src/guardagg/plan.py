"""Logical plans for frequency and aggregate propagation.

Columns of intermediate relations are named after canonical join variables
(``v0``, ``v1``, ...), the frequency column ``c`` and propagated aggregate
columns ``agg<j>`` (``agg<j>_sum`` / ``agg<j>_cnt`` for an AVG).  In a
:class:`Join` output, right-side columns that clash with left-side ones get a
``_s`` suffix (``c_s``, ``agg1_s``).

Three plan families are produced by :func:`build_plan`:

* ``Mode.GUAO``: each parent/child pair becomes Join -> Project -> GroupSum.
* ``Mode.GUAO_PLUS``: each pair is a single :class:`AggJoin`.
* 0MA queries (either mode): semi-joins only, no frequency column.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .catalog import Constraints
from .classifier import Classification, Kind
from .errors import PlanningError
from .expr import Column, Expr, Predicate, Var, map_predicate, refs, substitute
from .jointree import JoinTree, reroot
from .query import PIECEWISE, AggFunc, AggregateExpr, Query, render_expr


class Mode(enum.Enum):
    BASELINE = "baseline"
    GUAO = "guao"
    GUAO_PLUS = "guao-plus"

    @classmethod
    def parse(cls, text) -> "Mode":
        if isinstance(text, Mode):
            return text
        key = str(text).lower().replace("_", "-").replace("+", "-plus")
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown mode {text!r}")


@dataclass(frozen=True)
class AggCol:
    """A non-key column carried through the plan and how to merge it."""
    name: str
    combine: str            # "SUM", "MIN" or "MAX"
    bound: str = "i64"      # overflow domain for integer values: "u64" or "i64"


FREQ = AggCol("c", "SUM", "u64")


@dataclass(frozen=True)
class AggInit:
    column: str
    kind: str               # "value", "count", "one" or "none"
    expr: Expr | None = None

    def __str__(self):
        if self.kind == "value":
            return f"{self.column}:={render_expr(self.expr)}"
        if self.kind == "count":
            return f"{self.column}:=IF(ISNULL({render_expr(self.expr)}), 0, 1)"
        return f"{self.column}:={'1' if self.kind == 'one' else 'NULL'}"


@dataclass(frozen=True)
class AggColumnSpec:
    index: int              # aggregate position in the query
    column: str
    combine: str
    init: str               # init at the guard: "value" or "count"
    expr: Expr
    guard: int
    path: tuple[int, ...]   # guard first, root last
    bound: str = "i64"

    @property
    def col(self) -> AggCol:
        return AggCol(self.column, self.combine, self.bound)

    def init_at(self, node: int) -> AggInit:
        if node == self.guard:
            return AggInit(self.column, self.init, self.expr)
        return AggInit(self.column, "one" if self.combine == "SUM" else "none")


@dataclass(frozen=True)
class Link:
    """Parent/child tree edge behind a join, kept for constraint reasoning."""
    parent: int
    child: int
    parent_relation: str
    child_relation: str
    pairs: tuple[tuple[str, str], ...]   # (parent attribute, child attribute)

    def __str__(self):
        return f"{self.parent_relation}->{self.child_relation}"


# -- plan nodes --------------------------------------------------------------------

class PlanNode:
    op = "?"

    @property
    def inputs(self) -> tuple["PlanNode", ...]:
        return ()


@dataclass(frozen=True)
class Scan(PlanNode):
    atom: int
    alias: str
    relation: str
    columns: tuple[tuple[str, str], ...]   # (attribute, var)
    op = "Scan"

    def describe(self):
        cols = ", ".join(f"{v}<-{a}" for a, v in self.columns)
        return f"Scan {self.relation} AS {self.alias} [{cols}]"


@dataclass(frozen=True)
class Filter(PlanNode):
    child: PlanNode
    predicates: tuple[Predicate, ...] = ()
    op = "Filter"

    @property
    def inputs(self):
        return (self.child,)

    def describe(self):
        return "Filter " + (" AND ".join(str(p) for p in self.predicates) or "TRUE")


@dataclass(frozen=True)
class Project(PlanNode):
    child: PlanNode
    # (output, op, argument columns); op is copy, freq (u64 product of
    # frequencies), mul (i64 product), mul_u64, min or max
    items: tuple[tuple[str, str, tuple[str, ...]], ...]
    op = "Project"

    @property
    def inputs(self):
        return (self.child,)

    def describe(self):
        parts = []
        for out, op, args in self.items:
            if op == "copy":
                parts.append(out if args[0] == out else f"{out}:={args[0]}")
            elif op in ("freq", "mul", "mul_u64"):
                parts.append(f"{out}:={args[0]}*{args[1]}")
            else:
                parts.append(f"{out}:={op.upper()}({args[0]}, {args[1]})")
        return f"Project [{', '.join(parts)}]"


@dataclass(frozen=True)
class FreqInit(PlanNode):
    child: PlanNode
    inits: tuple[AggInit, ...] = ()
    op = "FreqInit"

    @property
    def inputs(self):
        return (self.child,)

    def describe(self):
        return "FreqInit [" + ", ".join(["c:=1"] + [str(i) for i in self.inits]) + "]"


@dataclass(frozen=True)
class Join(PlanNode):
    left: PlanNode
    right: PlanNode
    on: tuple[str, ...]
    link: Link | None = None
    op = "Join"

    @property
    def inputs(self):
        return (self.left, self.right)

    def describe(self):
        return f"Join on [{', '.join(self.on)}]" + (f" ({self.link})" if self.link else "")


@dataclass(frozen=True)
class SemiJoin(PlanNode):
    left: PlanNode
    right: PlanNode
    on: tuple[str, ...]
    link: Link | None = None
    op = "SemiJoin"

    @property
    def inputs(self):
        return (self.left, self.right)

    def describe(self):
        return f"SemiJoin on [{', '.join(self.on)}]" + (f" ({self.link})" if self.link else "")


@dataclass(frozen=True)
class AggJoin(PlanNode):
    left: PlanNode
    right: PlanNode
    on: tuple[str, ...]
    i_s: tuple[AggCol, ...] = ()
    i_r: tuple[AggCol, ...] = ()
    link: Link | None = None
    op = "AggJoin"

    @property
    def inputs(self):
        return (self.left, self.right)

    def describe(self):
        s = ", ".join(f"{a.combine}({a.name})" for a in self.i_s)
        r = ", ".join(f"{a.combine}({a.name})" for a in self.i_r)
        return (f"AggJoin on [{', '.join(self.on)}] I_S=[{s}] I_R=[{r}]"
                + (f" ({self.link})" if self.link else ""))


@dataclass(frozen=True)
class GroupSum(PlanNode):
    child: PlanNode
    group: tuple[str, ...]
    combine: tuple[AggCol, ...] = (FREQ,)
    op = "GroupSum"

    @property
    def inputs(self):
        return (self.child,)

    def describe(self):
        comb = ", ".join(f"{a.name}:={a.combine}({a.name})" for a in self.combine)
        return f"GroupSum by [{', '.join(self.group)}] {comb}"


@dataclass(frozen=True)
class FinalSpec:
    """A rewritten output aggregate evaluated on the root relation.

    ``func`` is one of MIN, MAX, COUNT_DISTINCT, COUNT_STAR, COUNT, SUM, AVG,
    MEDIAN, PERCENTILE, VARIANCE, STDDEV, CORR (computed from ``args`` and
    weighted by column ``weight`` when set) or AGG_MIN, AGG_MAX, AGG_SUM,
    AGG_COUNT, AGG_AVG (read from the propagated ``columns``)."""
    name: str
    func: str
    args: tuple[Expr, ...] = ()
    columns: tuple[str, ...] = ()
    weight: str | None = "c"
    fraction: float | None = None
    sample: bool = False

    def sql(self) -> str:
        f, w = self.func, self.weight
        a = [render_expr(x) for x in self.args]
        if f.startswith("AGG_"):
            if f == "AGG_AVG":
                return f"SUM({self.columns[0]}) / SUM({self.columns[1]})"
            comb = {"AGG_MIN": "MIN", "AGG_MAX": "MAX"}.get(f, "SUM")
            return f"{comb}({self.columns[0]})"
        if f == "COUNT_DISTINCT":
            return f"COUNT(DISTINCT {a[0]})"
        if f in ("MIN", "MAX"):
            return f"{f}({a[0]})"
        if w is None:
            if f == "COUNT_STAR":
                return "COUNT(*)"
            if f == "PERCENTILE":
                return f"PERCENTILE({a[0]}, {self.fraction!r})"
            name = {"VARIANCE": "VAR_SAMP", "STDDEV": "STDDEV_SAMP"}.get(f, f) if self.sample else f
            return f"{name}({', '.join(a)})"
        count = f"SUM(IF(ISNULL({a[0]}), 0, {w}))" if a else ""
        if f == "COUNT_STAR":
            return f"SUM({w})"
        if f == "COUNT":
            return count
        if f == "SUM":
            return f"SUM({a[0]} * {w})"
        if f == "AVG":
            return f"SUM({a[0]} * {w}) / {count}"
        if f in ("MEDIAN", "PERCENTILE"):
            p = 0.5 if f == "MEDIAN" else self.fraction
            return f"PERCENTILE({p!r}, {a[0]}, {w})"
        prefix = "SAMPLE_" if self.sample else ""
        return f"WEIGHTED_{prefix}{f}({', '.join(a)}; {w})"


@dataclass(frozen=True)
class FinalAggregate(PlanNode):
    child: PlanNode
    group_by: tuple[str, ...]
    specs: tuple[FinalSpec, ...]
    select: tuple[tuple[str, int, str], ...] = field(default=())   # (kind, index, name)
    op = "FinalAggregate"

    @property
    def inputs(self):
        return (self.child,)

    @property
    def output_names(self) -> tuple[str, ...]:
        if self.select:
            return tuple(s[2] for s in self.select)
        return tuple(s.name for s in self.specs)

    def describe(self):
        specs = ", ".join(f"{s.sql()} AS {s.name}" for s in self.specs)
        return f"FinalAggregate by [{', '.join(self.group_by)}] {specs}"


def schema(node: PlanNode) -> tuple[str, ...]:
    """Output column names of ``node``."""
    if isinstance(node, Scan):
        out = []
        for _, v in node.columns:
            if v not in out:
                out.append(v)
        return tuple(out)
    if isinstance(node, Filter):
        return schema(node.child)
    if isinstance(node, Project):
        return tuple(i[0] for i in node.items)
    if isinstance(node, FreqInit):
        return schema(node.child) + ("c",) + tuple(i.column for i in node.inits)
    if isinstance(node, Join):
        left = schema(node.left)
        return left + join_right_columns(left, schema(node.right), node.on)
    if isinstance(node, (SemiJoin, AggJoin)):
        return schema(node.left)
    if isinstance(node, GroupSum):
        return node.group + tuple(a.name for a in node.combine)
    if isinstance(node, FinalAggregate):
        return node.output_names
    raise TypeError(node)


def join_right_columns(left, right, on) -> tuple[str, ...]:
    out = []
    for col in right:
        if col in on:
            continue
        out.append(col + "_s" if col in left else col)
    return tuple(out)


def walk(node: PlanNode):
    """Nodes in post-order (children before parents, left before right)."""
    for child in node.inputs:
        yield from walk(child)
    yield node


def explain(node: PlanNode) -> str:
    lines = []

    def rec(n, depth):
        lines.append("  " * depth + n.describe())
        for c in n.inputs:
            rec(c, depth + 1)
    rec(node, 0)
    return "\n".join(lines)


def explain_dot(node: PlanNode) -> str:
    lines = ["digraph plan {", "  node [shape=box];"]
    counter = [0]

    def rec(n):
        my = counter[0]
        counter[0] += 1
        text = n.describe().replace('"', r'\"')
        lines.append(f'  p{my} [label="{text}"];')
        for c in n.inputs:
            cid = rec(c)
            lines.append(f"  p{my} -> p{cid};")
        return my
    rec(node)
    lines.append("}")
    return "\n".join(lines)


# -- planning ----------------------------------------------------------------------

def _var_expr(tree: JoinTree, expr: Expr) -> Expr:
    h = tree.hypergraph
    return substitute(expr, lambda c: Var(h.var(c)) if isinstance(c, Column) else c)


def _expr_vars(tree: JoinTree, agg: AggregateExpr) -> frozenset[str]:
    return frozenset(tree.hypergraph.var(c) for c in agg.columns)


def _off_root(cls: Classification, j: int) -> bool:
    g = cls.guards
    return cls.kind is Kind.PIECEWISE_GUARDED and g.aggregate_guards[j] != g.root_guard


def place_piecewise_aggregates(tree: JoinTree, cls: Classification,
                               query: Query) -> list[AggColumnSpec]:
    """Aggregate columns for every aggregate guarded below the root guard."""
    if cls.kind is not Kind.PIECEWISE_GUARDED:
        return []
    if tree.root != cls.guards.root_guard:
        tree = reroot(tree, cls.guards.root_guard)
    specs = []
    for j, agg in enumerate(query.aggregates):
        if not _off_root(cls, j):
            continue
        guard = cls.guards.aggregate_guards[j]
        path = tuple(tree.path_to_root(guard))
        expr = _var_expr(tree, agg.args[0])
        f = agg.func
        if f in (AggFunc.MIN, AggFunc.MAX):
            specs.append(AggColumnSpec(j, f"agg{j}", f.name, "value", expr, guard, path))
        elif f is AggFunc.SUM:
            specs.append(AggColumnSpec(j, f"agg{j}", "SUM", "value", expr, guard, path, "i64"))
        elif f is AggFunc.COUNT:
            specs.append(AggColumnSpec(j, f"agg{j}", "SUM", "count", expr, guard, path, "u64"))
        elif f is AggFunc.AVG:
            specs.append(AggColumnSpec(j, f"agg{j}_sum", "SUM", "value", expr, guard, path, "i64"))
            specs.append(AggColumnSpec(j, f"agg{j}_cnt", "SUM", "count", expr, guard, path, "u64"))
        else:
            raise PlanningError(f"{agg.sql()} cannot be propagated from a non-root guard")
    return specs


_PLAIN = {AggFunc.COUNT_STAR: "COUNT_STAR", AggFunc.COUNT: "COUNT", AggFunc.SUM: "SUM",
          AggFunc.AVG: "AVG", AggFunc.MIN: "MIN", AggFunc.MAX: "MAX",
          AggFunc.COUNT_DISTINCT: "COUNT_DISTINCT", AggFunc.MEDIAN: "MEDIAN",
          AggFunc.PERCENTILE: "PERCENTILE", AggFunc.VARIANCE: "VARIANCE",
          AggFunc.STDDEV: "STDDEV", AggFunc.CORR: "CORR"}


def rewrite_final_aggregates(aggs, cls: Classification, tree: JoinTree) -> list[FinalSpec]:
    """Map each query aggregate onto the root relation of a plan.  Aggregates
    guarded at the root are weighted by ``c`` (except for 0MA queries, which
    carry no frequencies); the others read their propagated column."""
    weight = None if cls.kind is Kind.ZERO_MA else "c"
    out = []
    for j, agg in enumerate(aggs):
        args = tuple(_var_expr(tree, a) for a in agg.args)
        if _off_root(cls, j):
            f = agg.func
            if f not in PIECEWISE or f is AggFunc.COUNT_STAR:
                raise PlanningError(f"internal: {agg.sql()} guarded away from the root")
            if f is AggFunc.AVG:
                out.append(FinalSpec(agg.alias, "AGG_AVG", args,
                                     (f"agg{j}_sum", f"agg{j}_cnt"), None))
            else:
                out.append(FinalSpec(agg.alias, "AGG_" + f.name, args, (f"agg{j}",), None))
            continue
        out.append(FinalSpec(agg.alias, _PLAIN[agg.func], args, (), weight,
                             agg.fraction, agg.sample))
    return out


def _link(tree: JoinTree, parent: int, child: int, on) -> Link:
    h = tree.hypergraph
    pairs = []
    for v in on:
        for pa, pv in h.columns[parent]:
            if pv != v:
                continue
            for ca, cv in h.columns[child]:
                if cv == v:
                    pairs.append((pa, ca))
    return Link(parent, child, h.relations[parent], h.relations[child], tuple(pairs))


def build_plan(query: Query, tree: JoinTree, cls: Classification, mode=Mode.GUAO_PLUS,
               prune: bool = True) -> FinalAggregate:
    """Frequency-propagation plan for ``query``.

    With ``prune`` every node only keeps the variables still needed above it;
    without it each intermediate keeps all variables of its atom, which makes
    the per-node frequencies directly inspectable."""
    mode = Mode.parse(mode)
    if not cls.applicable:
        raise PlanningError(f"query is {cls.label}; {cls.detail}")
    if mode is Mode.BASELINE:
        raise PlanningError("the baseline is evaluated without a plan")
    root = cls.guards.root_guard
    if tree.root != root:
        tree = reroot(tree, root)
    h = tree.hypergraph
    zero = cls.kind is Kind.ZERO_MA
    specs = place_piecewise_aggregates(tree, cls, query)
    group_vars = tuple(h.var(g) for g in query.group_by)

    local = {u: set() for u in range(tree.size)}
    local[root].update(group_vars)
    for j, agg in enumerate(query.aggregates):
        if not _off_root(cls, j):
            local[root] |= _expr_vars(tree, agg)
    for s in specs:
        local[s.guard] |= set(refs_names(s.expr))

    def up(u):
        p = tree.parent[u]
        return tree.label(u) & tree.label(p) if p is not None else frozenset()

    def ordered(u, wanted):
        return tuple(v for v in h.edge_vars(u) if v in wanted)

    def base(u):
        node = Scan(u, h.names[u], h.relations[u], h.columns[u])
        preds = tuple(map_predicate(p, lambda c: Var(h.var(c)))
                      for p in query.atoms[u].predicates)
        node = Filter(node, preds)
        if prune and tree.size > 1:
            needed = set(up(u)) | local[u]
            for x in tree.children(u):
                needed |= tree.label(u) & tree.label(x)
            keep = ordered(u, needed)
            if keep != schema(node):
                node = Project(node, tuple((v, "copy", (v,)) for v in keep))
        if not zero:
            node = FreqInit(node, tuple(s.init_at(u) for s in specs if u in s.path))
        return node

    def cols_at(u):
        return [s.col for s in specs if u in s.path]

    def sub(u):
        node = base(u)
        kids = tree.children(u)
        for i, x in enumerate(kids):
            right = sub(x)
            right_cols = set(schema(right))
            on = tuple(v for v in schema(node) if v in right_cols and v in tree.label(x))
            link = _link(tree, u, x, on)
            carried = [s.col for s in specs if x in s.path]
            rest = [c for c in cols_at(u) if c not in carried]
            if zero:
                node = SemiJoin(node, right, on, link)
            elif mode is Mode.GUAO_PLUS:
                node = AggJoin(node, right, on, tuple(carried), tuple(rest), link)
            else:
                join = Join(node, right, on, link)
                if prune:
                    wanted = set(up(u)) | (local[u] if u == root else set())
                    for y in kids[i + 1:]:
                        wanted |= tree.label(u) & tree.label(y)
                else:
                    wanted = set(tree.label(u))
                keep = tuple(v for v in schema(node) if v in wanted)
                items = [(v, "copy", (v,)) for v in keep]
                items.append(("c", "freq", ("c", "c_s")))
                for col in cols_at(u):
                    mul = "mul_u64" if col.bound == "u64" else "mul"
                    if col in carried:
                        op = mul if col.combine == "SUM" else col.combine.lower()
                        items.append((col.name, op, (col.name, col.name + "_s")))
                    elif col.combine == "SUM":
                        items.append((col.name, mul, (col.name, "c_s")))
                    else:
                        items.append((col.name, "copy", (col.name,)))
                node = GroupSum(Project(join, tuple(items)), keep, (FREQ,) + tuple(cols_at(u)))
        return node

    final_specs = rewrite_final_aggregates(query.aggregates, cls, tree)
    select = tuple((s.kind, s.index, s.name) for s in query.select)
    return FinalAggregate(sub(root), group_vars, tuple(final_specs), select)


def refs_names(expr: Expr) -> list[str]:
    return [r.name for r in refs(expr)]


# -- FK/PK refinements ---------------------------------------------------------------

def _has(node: PlanNode, *types) -> bool:
    return any(isinstance(n, types) for n in walk(node))


def _carried_aggs(node: PlanNode) -> bool:
    return any(col != "c" and col.startswith("agg") for col in schema(node))


def _scan_keys(node: Scan, constraints: Constraints) -> set[frozenset[str]]:
    var = dict(node.columns)
    return {frozenset(var[a] for a in key) for key in constraints.unique_keys(node.relation)
            if all(a in var for a in key)}


def keys(node: PlanNode, constraints: Constraints) -> set[frozenset[str]]:
    """Column sets provably unique in the output of ``node``."""
    if isinstance(node, Scan):
        return _scan_keys(node, constraints)
    if isinstance(node, (Filter, FreqInit)):
        return keys(node.child, constraints)
    if isinstance(node, Project):
        copied = {out for out, op, args in node.items if op == "copy" and args == (out,)}
        return {k for k in keys(node.child, constraints) if k <= copied}
    if isinstance(node, Join):
        left, right = keys(node.left, constraints), keys(node.right, constraints)
        on = set(node.on)
        out = set()
        if any(k <= on for k in right):
            out |= left
        if any(k <= on for k in left):
            lcols = schema(node.left)
            out |= {k for k in right if not any(c in lcols and c not in on for c in k)}
        return out
    if isinstance(node, (SemiJoin, AggJoin)):
        return keys(node.left, constraints)
    if isinstance(node, GroupSum):
        group = set(node.group)
        return {k for k in keys(node.child, constraints) if k <= group} | {frozenset(group)}
    return set()


def _fk_link(link: Link | None, constraints: Constraints) -> bool:
    """True when a declared foreign key of the parent references a unique key
    of the child through the join attributes, so each parent tuple has at
    most one partner."""
    if link is None:
        return False
    pairs = {(p.lower(), c.lower()) for p, c in link.pairs}
    child_keys = [frozenset(a.lower() for a in k)
                  for k in constraints.unique_keys(link.child_relation)]
    for fk in constraints.foreign_keys:
        if fk.relation.lower() != link.parent_relation.lower():
            continue
        if fk.ref_relation.lower() != link.child_relation.lower():
            continue
        fk_pairs = {(a.lower(), b.lower()) for a, b in zip(fk.attributes, fk.ref_attributes)}
        if fk_pairs <= pairs and frozenset(b for _, b in fk_pairs) in child_keys:
            return True
    return False


def _frequency_one(node: PlanNode) -> bool:
    """Every output tuple of ``node`` provably has frequency 1 and it carries
    no aggregate columns."""
    return not _has(node, Join, AggJoin, GroupSum) and not _carried_aggs(node)


def _pregroup(right: PlanNode, on, constraints) -> PlanNode:
    if isinstance(right, GroupSum) or _has(right, Join, SemiJoin, AggJoin, GroupSum):
        return right
    if any(k <= set(on) for k in keys(right, constraints)):
        return right
    cols = schema(right)
    if any(c.startswith("agg") for c in cols):
        # combine functions are not recoverable from a bare base plan
        return right
    return GroupSum(right, tuple(v for v in cols if v in on), (FREQ,))


def apply_fkpk(plan: PlanNode, constraints: Constraints | None) -> PlanNode:
    """Constraint-driven refinements (no-op without constraints):

    (a) joins along a parent foreign key into a child unique key whose
        subtree has frequency 1 become semi-joins;
    (b) a GroupSum is dropped when its input is unique on the grouping;
    (c) a leaf child is pre-grouped on the join attributes unless those
        attributes already contain a unique key.
    """
    if not constraints:
        return plan

    def unit(join: Join, group: GroupSum | None, project: Project):
        left, right = rw(join.left), rw(join.right)
        if _fk_link(join.link, constraints) and _frequency_one(right):
            return SemiJoin(left, right, join.on, join.link)
        right = _pregroup(right, join.on, constraints)
        node = Project(Join(left, right, join.on, join.link), project.items)
        if group is None:
            return node
        g = GroupSum(node, group.group, group.combine)
        return _drop_group(g)

    def _drop_group(g: GroupSum):
        if any(k <= set(g.group) for k in keys(g.child, constraints)):
            if schema(g.child) == schema(g):
                return g.child
            return Project(g.child, tuple((c, "copy", (c,)) for c in schema(g)))
        return g

    def rw(node: PlanNode) -> PlanNode:
        if (isinstance(node, GroupSum) and isinstance(node.child, Project)
                and isinstance(node.child.child, Join)):
            return unit(node.child.child, node, node.child)
        if isinstance(node, Project) and isinstance(node.child, Join):
            return unit(node.child, None, node)
        if isinstance(node, AggJoin):
            left, right = rw(node.left), rw(node.right)
            if not node.i_s and _fk_link(node.link, constraints) and _frequency_one(right):
                return SemiJoin(left, right, node.on, node.link)
            return replace(node, left=left, right=right)
        if isinstance(node, (Join, SemiJoin)):
            return replace(node, left=rw(node.left), right=rw(node.right))
        if isinstance(node, GroupSum):
            return _drop_group(replace(node, child=rw(node.child)))
        if isinstance(node, (Filter, FreqInit, Project)):
            return replace(node, child=rw(node.child))
        if isinstance(node, FinalAggregate):
            return replace(node, child=rw(node.child))
        return node

    out = rw(plan)
    if (isinstance(out, FinalAggregate) and not _has(out, Join, AggJoin, GroupSum)
            and not any(isinstance(n, FreqInit) and n.inits for n in walk(out))
            and all(not s.func.startswith("AGG_") for s in out.specs)):
        out = _strip_frequencies(out)
    return out


def _strip_frequencies(plan: FinalAggregate) -> FinalAggregate:
    """All frequencies are 1: drop the c column and evaluate the original
    aggregates directly."""
    def rw(node):
        if isinstance(node, FreqInit):
            return rw(node.child)
        if isinstance(node, Project):
            items = tuple(i for i in node.items if i[0] != "c")
            return replace(node, child=rw(node.child), items=items)
        if isinstance(node, (SemiJoin, Join)):
            return replace(node, left=rw(node.left), right=rw(node.right))
        if isinstance(node, Filter):
            return replace(node, child=rw(node.child))
        return node
    specs = tuple(replace(s, weight=None) for s in plan.specs)
    return replace(plan, child=rw(plan.child), specs=specs)
