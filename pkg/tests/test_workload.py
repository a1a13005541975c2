import random

import pytest

from guardagg.catalog import register_constraints
from guardagg.engine import prepare
from guardagg.classifier import Kind
from guardagg.catalog import load_constraints
from guardagg.query import parse_query
from guardagg.workload import (chain_graph, fkpk_database, path_query_sql, random_graph,
                               random_piecewise_case, star_case, tree_query_sql, workload)

from conftest import DATA

PATH_03 = """SELECT COUNT(*) FROM
edge e1, edge e2, edge e3, edge e4
WHERE e1.toNode = e2.fromNode
 AND  e2.toNode = e3.fromNode
 AND  e3.toNode = e4.fromNode"""


def test_path_03_exact_text():
    assert path_query_sql(3) == PATH_03
    assert workload("path", 3) == {"path-03.sql": PATH_03 + "\n"}


def test_path_query_sizes():
    q = parse_query(path_query_sql(1))
    assert len(q.atoms) == 2 and len(q.joins) == 1
    assert len(parse_query(path_query_sql(8)).atoms) == 9
    with pytest.raises(ValueError):
        path_query_sql(0)


def _children(sql):
    q = parse_query(sql)
    return sorted((j.left.atom, j.right.atom) for j in q.joins)


def test_tree_shapes():
    assert _children(tree_query_sql(1)) == [("e1", "e2"), ("e1", "e3")]
    assert _children(tree_query_sql(2)) == [("e1", "e2"), ("e1", "e3"), ("e2", "e4"), ("e2", "e5")]
    assert _children(tree_query_sql(3)) == [("e1", "e2"), ("e1", "e4"), ("e2", "e3"),
                                            ("e2", "e5"), ("e3", "e6")]
    for k in (1, 2, 3):
        q = parse_query(tree_query_sql(k))
        assert all(j.left.name == "toNode" and j.right.name == "fromNode" for j in q.joins)
    with pytest.raises(ValueError):
        workload("star", 2)
    with pytest.raises(ValueError):
        tree_query_sql(0)


def test_graph_generators():
    g = random_graph(10, 30, seed=1)
    assert g.cardinality == 30 and all(0 <= u < 10 and 0 <= v < 10 for u, v in g.rows)
    assert random_graph(10, 30, seed=1) == g
    assert chain_graph(5).rows == ((1, 2), (2, 3), (3, 4), (4, 5))


def test_random_piecewise_cases_are_in_fragment():
    rng = random.Random(1)
    for _ in range(100):
        case = random_piecewise_case(rng)
        prep = prepare(case.sql, case.catalog)
        assert prep.classification.applicable, case.sql
        q = prep.query
        assert 3 <= len(q.atoms) <= 6
        assert all(len(r.schema) <= 4 for r in case.catalog.relations.values())
        assert all(r.cardinality <= 200 for r in case.catalog.relations.values())


def test_star_case_sizes():
    case = star_case()
    assert max(r.cardinality for r in case.catalog.relations.values()) <= 10 ** 4
    assert prepare(case.sql, case.catalog).classification.kind is Kind.PIECEWISE_GUARDED


def test_fkpk_database_respects_bundled_keys():
    rng = random.Random(0)
    for name in ("tpch.txt", "tree_keys.txt"):
        for _ in range(10):
            register_constraints(fkpk_database(rng), load_constraints(DATA / "constraints" / name))
