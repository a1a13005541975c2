import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guardagg.catalog import AttributeType, Relation, catalog_of
from guardagg.errors import CyclicError
from guardagg.expr import Column
from guardagg.jointree import (JoinTree, gyo_join_tree, join_tree, render_dot, render_text,
                               reroot, to_hypergraph, verify_connectedness)
from guardagg.query import parse_query


def _query_for(edges):
    """SQL and catalog whose hypergraph is ``edges`` (lists of vertex names)."""
    rels = [Relation.from_rows(f"r{i}", [(f"x{v}", AttributeType.INT64) for v in e], [])
            for i, e in enumerate(edges)]
    conds = []
    for v in sorted({v for e in edges for v in e}):
        holders = [i for i, e in enumerate(edges) if v in e]
        conds += [f"t{a}.x{v} = t{b}.x{v}" for a, b in zip(holders, holders[1:])]
    sql = "SELECT COUNT(*) FROM " + ", ".join(f"r{i} t{i}" for i in range(len(edges)))
    if conds:
        sql += " WHERE " + " AND ".join(conds)
    return sql, catalog_of(*rels)


def _tree_of(edges):
    sql, cat = _query_for(edges)
    return gyo_join_tree(to_hypergraph(parse_query(sql, cat), cat))


def _vertex_gyo_acyclic(edges) -> bool:
    """Textbook GYO in its vertex/edge-deletion form: drop vertices that occur
    in one edge only, drop edges contained in another (or empty); the
    hypergraph is acyclic iff at most one edge survives."""
    es = [set(e) for e in edges]
    changed = True
    while changed:
        changed = False
        for v in {v for e in es for v in e}:
            if sum(v in e for e in es) == 1:
                for e in es:
                    e.discard(v)
                changed = True
        for i, e in enumerate(es):
            if any(j != i and (e < f or (e == f and j < i)) for j, f in enumerate(es)) or not e:
                if len(es) > 1:
                    del es[i]
                    changed = True
                    break
    return len(es) <= 1


def _prufer_trees(n):
    if n == 1:
        yield []
        return
    if n == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        degree = [1] * n
        for x in seq:
            degree[x] += 1
        out = []
        for x in seq:
            leaf = min(i for i in range(n) if degree[i] == 1)
            out.append((leaf, x))
            degree[leaf] -= 1
            degree[x] -= 1
        u, w = [i for i in range(n) if degree[i] == 1]
        out.append((u, w))
        yield out


def _has_join_tree_brute_force(edges) -> bool:
    """Is there any spanning tree on the edges with the running intersection
    property?  Different components may be linked arbitrarily."""
    n = len(edges)
    for tree in _prufer_trees(n):
        adj = {i: set() for i in range(n)}
        for a, b in tree:
            adj[a].add(b)
            adj[b].add(a)
        ok = True
        for v in {v for e in edges for v in e}:
            holders = {i for i in range(n) if v in edges[i]}
            start = next(iter(holders))
            seen, todo = {start}, [start]
            while todo:
                u = todo.pop()
                for w in adj[u] & holders:
                    if w not in seen:
                        seen.add(w)
                        todo.append(w)
            if seen != holders:
                ok = False
                break
        if ok:
            return True
    return False


def _random_hypergraph(rng, max_edges):
    n = rng.randint(1, max_edges)
    nv = rng.randint(1, 7)
    return [sorted(rng.sample(range(nv), k=rng.randint(1, min(3, nv)))) for _ in range(n)]


def test_variables_follow_first_appearance(suppliers, median_sql):
    q = parse_query(median_sql, suppliers)
    h = to_hypergraph(q, suppliers)
    assert h.var(Column("part", "p_partkey")) == "v0"
    assert h.var(Column("partsupp", "ps_partkey")) == "v0"
    assert h.var(Column("part", "p_price")) == "v1"
    assert h.var(Column("supplier", "s_suppkey")) == h.var(Column("partsupp", "ps_suppkey"))
    assert h.attributes_of("v0") == [("part", "p_partkey"), ("partsupp", "ps_partkey")]


def test_median_example_tree(suppliers, median_sql):
    tree = join_tree(parse_query(median_sql, suppliers), suppliers)
    names = tree.names
    edges = {frozenset((names[a], names[b])) for a, b in
             (tuple(e) for e in tree.undirected_edges())}
    assert edges == {frozenset(p) for p in [("part", "partsupp"), ("partsupp", "supplier"),
                                            ("supplier", "nation"), ("nation", "region")]}
    assert verify_connectedness(tree)
    rooted = reroot(tree, "supplier")
    assert rooted.root == tree.node("supplier")
    assert rooted.undirected_edges() == tree.undirected_edges()
    assert [names[c] for c in rooted.children(rooted.root)] == ["partsupp", "nation"]
    assert rooted.depth(tree.node("part")) == 2
    assert rooted.path_to_root(tree.node("region"))[-1] == rooted.root
    assert sorted(rooted.subtree(tree.node("nation"))) == sorted(
        [tree.node("nation"), tree.node("region")])
    post = rooted.postorder()
    assert post[-1] == rooted.root and len(post) == 5
    with pytest.raises(KeyError):
        tree.node("nosuch")


def test_triangle_is_cyclic():
    with pytest.raises(CyclicError) as info:
        _tree_of([["a", "b"], ["b", "c"], ["c", "a"]])
    assert len(info.value.residual) == 3


def test_single_atom_and_cartesian_product():
    single = _tree_of([["a"]])
    assert single.size == 1 and single.root == 0 and verify_connectedness(single)
    prod = _tree_of([["a"], ["b"], ["c", "d"]])
    assert verify_connectedness(prod)
    assert all(prod.parent[u] == prod.root for u in range(3) if u != prod.root)


def test_renderers_mention_every_atom(suppliers, median_sql):
    tree = join_tree(parse_query(median_sql, suppliers), suppliers)
    text, dot = render_text(tree), render_dot(tree)
    for name in tree.names:
        assert name in text and name in dot
    assert dot.startswith("digraph") and dot.count("->") == 4


def test_gyo_matches_brute_force_on_small_hypergraphs():
    rng = random.Random(11)
    outcomes = set()
    for _ in range(300):
        edges = _random_hypergraph(rng, 6)
        try:
            tree = _tree_of(edges)
            acyclic = True
            assert verify_connectedness(tree)
        except CyclicError:
            acyclic = False
        assert acyclic == _has_join_tree_brute_force(edges), edges
        outcomes.add(acyclic)
    assert outcomes == {True, False}


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_gyo_matches_vertex_elimination_up_to_eight_edges(seed):
    rng = random.Random(seed)
    edges = _random_hypergraph(rng, 8)
    try:
        tree = _tree_of(edges)
    except CyclicError:
        assert not _vertex_gyo_acyclic(edges)
        return
    assert _vertex_gyo_acyclic(edges)
    assert verify_connectedness(tree)
    for u in range(tree.size):
        assert verify_connectedness(reroot(tree, u))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 9))
def test_acyclicity_invariant_under_atom_order(seed):
    rng = random.Random(seed)
    edges = _random_hypergraph(rng, 7)
    shuffled = edges[:]
    rng.shuffle(shuffled)

    def acyclic(es):
        try:
            _tree_of(es)
            return True
        except CyclicError:
            return False
    assert acyclic(edges) == acyclic(shuffled)


def test_verify_connectedness_rejects_broken_tree(suppliers, median_sql):
    tree = reroot(join_tree(parse_query(median_sql, suppliers), suppliers), "supplier")
    parent = list(tree.parent)
    parent[tree.node("part")] = tree.node("nation")   # part no longer meets partsupp
    broken = JoinTree(tree.hypergraph, tuple(parent), tree.root)
    assert not verify_connectedness(broken)
