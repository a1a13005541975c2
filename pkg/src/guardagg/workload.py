"""Query and database generators: path/tree homomorphism queries over an
edge relation, random graphs, and random acyclic aggregate queries with
matching random databases for differential testing."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .catalog import EDGE_SCHEMA, AttributeType, Catalog, Relation, catalog_of


# -- graph pattern queries -----------------------------------------------------------

def path_query_sql(joins: int) -> str:
    """COUNT(*) over ``joins + 1`` edge atoms chained head to tail."""
    if joins < 1:
        raise ValueError("a path query needs at least one join")
    atoms = ", ".join(f"edge e{i}" for i in range(1, joins + 2))
    conds = [f"e{i}.toNode = e{i + 1}.fromNode" for i in range(1, joins + 1)]
    return ("SELECT COUNT(*) FROM\n" + atoms + "\nWHERE " + conds[0]
            + "".join(f"\n AND  {c}" for c in conds[1:]))


def _tree_edges(index: int) -> list[tuple[int, int]]:
    """(parent atom, child atom) pairs; a child's fromNode meets its parent's
    toNode.

    * tree-01: one binary branch below e1;
    * tree-02: tree-01 with a second binary branch below e2;
    * tree-k, k >= 3: a caterpillar whose spine e1 -> ... -> e_k carries one
      leg at every spine node (tree-03 has spine e1, e2, e3 and legs e4, e5, e6).
    """
    if index < 1:
        raise ValueError("tree index starts at 1")
    if index == 1:
        return [(1, 2), (1, 3)]
    if index == 2:
        return [(1, 2), (1, 3), (2, 4), (2, 5)]
    spine = list(range(1, index + 1))
    edges = [(a, b) for a, b in zip(spine, spine[1:])]
    edges += [(s, index + k + 1) for k, s in enumerate(spine)]
    return edges


def tree_query_sql(index: int) -> str:
    edges = _tree_edges(index)
    n = max(max(e) for e in edges)
    atoms = ", ".join(f"edge e{i}" for i in range(1, n + 1))
    conds = [f"e{p}.toNode = e{c}.fromNode" for p, c in edges]
    return ("SELECT COUNT(*) FROM\n" + atoms + "\nWHERE " + conds[0]
            + "".join(f"\n AND  {c}" for c in conds[1:]))


def workload(kind: str, size: int) -> dict[str, str]:
    """File name -> SQL for a generated workload item."""
    if kind == "path":
        return {f"path-{size:02d}.sql": path_query_sql(size) + "\n"}
    if kind == "tree":
        return {f"tree-{size:02d}.sql": tree_query_sql(size) + "\n"}
    raise ValueError(f"unknown workload kind {kind!r}")


def edge_relation(pairs, name: str = "edge") -> Relation:
    return Relation.from_rows(name, EDGE_SCHEMA, pairs)


def random_graph(nodes: int, edges: int, seed: int = 0, name: str = "edge") -> Relation:
    rng = random.Random(seed)
    pairs = [(rng.randrange(nodes), rng.randrange(nodes)) for _ in range(edges)]
    return edge_relation(pairs, name)


def chain_graph(nodes: int, name: str = "edge") -> Relation:
    return edge_relation([(i, i + 1) for i in range(1, nodes)], name)


# -- random aggregate queries --------------------------------------------------------

RELAXED = ("COUNT(*)", "COUNT", "SUM", "MIN", "MAX", "AVG")
STATISTICAL = ("MEDIAN", "STDDEV", "VARIANCE", "CORR", "PERCENTILE", "COUNT_DISTINCT")


@dataclass
class RandomCase:
    catalog: Catalog
    sql: str
    seed: int = 0


@dataclass
class _Shape:
    n: int
    parent: list
    attrs: list            # attribute names per atom
    joins: list            # (atom, attr, atom, attr)


def _random_shape(rng: random.Random, n: int, max_attrs: int = 4) -> _Shape:
    parent = [None] + [rng.randrange(i) for i in range(1, n)]
    attrs: list[list[str]] = [[] for _ in range(n)]
    joins = []

    def fresh(i):
        name = f"a{len(attrs[i])}"
        attrs[i].append(name)
        return name

    for i in range(1, n):
        p = parent[i]
        for _ in range(2 if rng.random() < 0.15 else 1):
            ci = fresh(i) if len(attrs[i]) < max_attrs else rng.choice(attrs[i])
            if attrs[p] and (len(attrs[p]) >= max_attrs or rng.random() < 0.35):
                pa = rng.choice(attrs[p])
            else:
                pa = fresh(p)
            joins.append((p, pa, i, ci))
    for i in range(n):
        target = rng.randint(max(1, len(attrs[i])), max_attrs)
        while len(attrs[i]) < target:
            fresh(i)
    return _Shape(n, parent, attrs, joins)


def _random_rows(rng: random.Random, arity: int, count: int, domain: int, null_rate: float):
    rows = []
    for _ in range(count):
        rows.append(tuple(None if rng.random() < null_rate else rng.randrange(domain)
                          for _ in range(arity)))
    return rows


def _agg_sql(rng: random.Random, func: str, atom: str, attrs: list[str]) -> str:
    def ref():
        return f"{atom}.{rng.choice(attrs)}"

    def scalar():
        r = rng.random()
        if r < 0.7 or len(attrs) < 1:
            return ref()
        if r < 0.85:
            return f"{ref()} + {ref()}"
        return f"{ref()} * {rng.randint(2, 3)}"
    if func == "COUNT(*)":
        return "COUNT(*)"
    if func == "COUNT_DISTINCT":
        return f"COUNT(DISTINCT {ref()})"
    if func == "CORR":
        return f"CORR({ref()}, {ref()})"
    if func == "PERCENTILE":
        return f"PERCENTILE({scalar()}, {rng.choice([0.0, 0.25, 0.5, 0.9, 1.0])})"
    return f"{func}({scalar()})"


def _predicate_sql(rng: random.Random, atom: str, attrs: list[str], domain: int) -> str:
    a = f"{atom}.{rng.choice(attrs)}"
    if rng.random() < 0.5:
        op = rng.choice(["<", "<=", ">", ">=", "<>", "="])
        return f"{a} {op} {rng.randrange(domain)}"
    vals = sorted({rng.randrange(domain) for _ in range(rng.randint(1, 4))})
    return f"{a} IN ({', '.join(map(str, vals))})"


def random_piecewise_case(rng: random.Random, min_atoms: int = 3, max_atoms: int = 6,
                          max_rows: int = 200, max_domain: int = 20,
                          statistical: bool = True, with_data: bool = True) -> RandomCase:
    """A random acyclic piecewise-guarded query over a random database.

    Non-decomposable aggregates only read the chosen root-guard atom; the
    decomposable ones read a random atom.  Atom order in FROM is shuffled."""
    n = rng.randint(min_atoms, max_atoms)
    shape = _random_shape(rng, n)
    domain = rng.randint(3, max_domain)
    rels = []
    for i in range(n):
        count = rng.randint(0, max_rows) if rng.random() < 0.3 else rng.randint(1, max(1, max_rows // 4))
        schema = [(a, AttributeType.INT64) for a in shape.attrs[i]]
        rows = _random_rows(rng, len(schema), count, domain, 0.04) if with_data else []
        rels.append(Relation.from_rows(f"r{i}", schema, rows))
    catalog = catalog_of(*rels)
    alias = [f"t{i}" for i in range(n)]

    g = rng.randrange(n)
    gattrs = shape.attrs[g]
    group = rng.sample(gattrs, k=rng.randint(0, min(2, len(gattrs))))
    funcs = list(RELAXED) + (["MEDIAN", "MEDIAN", "STDDEV", "VARIANCE", "CORR", "PERCENTILE",
                              "COUNT_DISTINCT"] if statistical else [])
    items = [f"{alias[g]}.{a}" for a in group]
    for _ in range(rng.randint(1, 3)):
        f = rng.choice(funcs)
        at = g if f in STATISTICAL or f == "MEDIAN" else rng.randrange(n)
        items.append(_agg_sql(rng, f, alias[at], shape.attrs[at]))
    conds = [f"{alias[p]}.{pa} = {alias[c]}.{ca}" for p, pa, c, ca in shape.joins]
    for i in range(n):
        if rng.random() < 0.25:
            conds.append(_predicate_sql(rng, alias[i], shape.attrs[i], domain))
    rng.shuffle(conds)
    order = list(range(n))
    rng.shuffle(order)
    sql = "SELECT " + ", ".join(items)
    sql += " FROM " + ", ".join(f"r{i} {alias[i]}" for i in order)
    if conds:
        sql += " WHERE " + " AND ".join(conds)
    if group:
        sql += " GROUP BY " + ", ".join(f"{alias[g]}.{a}" for a in group)
    return RandomCase(catalog, sql)


def random_any_query(rng: random.Random) -> RandomCase:
    """A random query that may fall outside every fragment: extra join
    conditions (possibly cyclic), cross-atom aggregate arguments, statistical
    aggregates away from the grouping, grouping spread over atoms."""
    n = rng.randint(2, 6)
    shape = _random_shape(rng, n)
    rels = [Relation.from_rows(f"r{i}", [(a, AttributeType.INT64) for a in shape.attrs[i]], [])
            for i in range(n)]
    catalog = catalog_of(*rels)
    alias = [f"t{i}" for i in range(n)]

    def ref(i):
        return f"{alias[i]}.{rng.choice(shape.attrs[i])}"
    conds = [f"{alias[p]}.{pa} = {alias[c]}.{ca}" for p, pa, c, ca in shape.joins]
    for _ in range(rng.choice([0, 0, 1, 2])):
        a, b = rng.sample(range(n), 2)
        conds.append(f"{ref(a)} = {ref(b)}")
    group_atoms = rng.sample(range(n), k=rng.choice([0, 1, 1, 2]))
    group = sorted({ref(i) for i in group_atoms})
    items = list(group)
    all_f = ["COUNT(*)", "COUNT", "SUM", "MIN", "MAX", "AVG", "MEDIAN", "STDDEV",
             "COUNT_DISTINCT", "CORR"]
    for _ in range(rng.randint(1, 3)):
        f = rng.choice(all_f)
        i = rng.randrange(n)
        if f == "COUNT(*)":
            items.append("COUNT(*)")
        elif f == "CORR":
            items.append(f"CORR({ref(i)}, {ref(rng.randrange(n))})")
        elif f == "COUNT_DISTINCT":
            items.append(f"COUNT(DISTINCT {ref(i)})")
        elif rng.random() < 0.2:
            items.append(f"{f}({ref(i)} * {ref(rng.randrange(n))})")
        else:
            items.append(f"{f}({ref(i)})")
    order = list(range(n))
    rng.shuffle(order)
    sql = "SELECT " + ", ".join(items) + " FROM " + ", ".join(f"r{i} {alias[i]}" for i in order)
    if conds:
        sql += " WHERE " + " AND ".join(conds)
    if group:
        sql += " GROUP BY " + ", ".join(group)
    return RandomCase(catalog, sql)


# -- fixed synthetic workloads ---------------------------------------------------------

def star_case(fact_rows: int = 200, dim_rows: int = 200, keys: int = 10, seed: int = 0) -> RandomCase:
    """A fact table joined with three dimension tables on non-unique keys:
    every fact tuple meets (dim_rows / keys) ** 3 combinations."""
    rng = random.Random(seed)
    I = AttributeType.INT64
    fact = Relation.from_rows("fact", [("a", I), ("b", I), ("c", I), ("m", I)],
                              [(rng.randrange(keys), rng.randrange(keys), rng.randrange(keys),
                                rng.randrange(100)) for _ in range(fact_rows)])

    def dim(name, key):
        return Relation.from_rows(name, [(key, I), ("w", I)],
                                  [(k % keys, rng.randrange(1000)) for k in range(dim_rows)])
    catalog = catalog_of(fact, dim("da", "a"), dim("db", "b"), dim("dc", "c"))
    sql = ("SELECT COUNT(*), MIN(x.w), SUM(f.m), MAX(z.w) FROM fact f, da x, db y, dc z "
           "WHERE f.a = x.a AND f.b = y.b AND f.c = z.c")
    return RandomCase(catalog, sql, seed)


def fkpk_database(rng: random.Random, sizes=(4, 6, 5, 8, 10)) -> Catalog:
    """A random database over the region/nation/supplier/partsupp/part schema in
    which every table is unique on its own key column and every supplier key
    occurs in partsupp at most once.  Every unique key of the bundled
    ``tpch.txt`` and ``tree_keys.txt`` constraint sets holds; some partsupp
    rows refer to missing suppliers and some suppliers have no partsupp row,
    which foreign keys here do not forbid."""
    n_reg, n_nat, n_sup, n_ps, n_part = sizes
    I, T = AttributeType.INT64, AttributeType.TEXT
    region = Relation.from_rows("region", [("r_regionkey", I), ("r_name", T)],
                                [(k, rng.choice(["Europe", "Asia", "America"]))
                                 for k in range(1, n_reg + 1)])
    nation = Relation.from_rows("nation", [("n_nationkey", I), ("n_regionkey", I)],
                                [(k, rng.randint(1, n_reg)) for k in range(1, n_nat + 1)])
    sup_keys = list(range(1, n_sup + 1))
    supplier = Relation.from_rows("supplier", [("s_nationkey", I), ("s_suppkey", I), ("s_acctbal", I)],
                                  [(rng.randint(1, n_nat), k, rng.randint(-50, 100)) for k in sup_keys])
    ps_sup = rng.sample(range(1, n_sup + 3), k=min(n_ps, n_sup + 2))
    partsupp = Relation.from_rows("partsupp", [("ps_suppkey", I), ("ps_partkey", I)],
                                  [(s, rng.randint(1, n_part)) for s in ps_sup])
    part = Relation.from_rows("part", [("p_partkey", I), ("p_price", I)],
                              [(k, rng.randint(900, 2000)) for k in range(1, n_part + 1)])
    return catalog_of(region, nation, supplier, partsupp, part)
