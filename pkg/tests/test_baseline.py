import random
import statistics

import numpy as np
import pytest

from guardagg.baseline import join_cardinality, naive_execute, walk_count
from guardagg.catalog import AttributeType, Relation, catalog_of
from guardagg.errors import BudgetExceeded
from guardagg.query import parse_query
from guardagg.workload import chain_graph, path_query_sql, random_graph


def test_worked_example_full_join(suppliers, median_sql):
    q = parse_query(median_sql, suppliers)
    table, stats = naive_execute(q, suppliers)
    assert table.scalar() == 20
    assert join_cardinality(q, suppliers) == 110
    assert stats.peak_materialised_tuples == 110
    assert stats.operators[-1].op == "Aggregate"


def test_textbook_aggregates():
    I = AttributeType.INT64
    r = Relation.from_rows("r", [("g", I), ("x", I), ("y", I)],
                           [(1, 1, 2), (1, 2, 4), (1, 4, 7), (2, 5, None), (2, None, 1)])
    cat = catalog_of(r)
    sql = ("SELECT g, COUNT(*), COUNT(x), COUNT(DISTINCT y), SUM(x), AVG(x), MIN(y), MAX(y), "
           "MEDIAN(x), PERCENTILE(x, 0.25), VARIANCE(x), VAR_SAMP(x), STDDEV(x), CORR(x, y) "
           "FROM r GROUP BY g")
    table, _ = naive_execute(parse_query(sql, cat), cat)
    g1 = table.rows[0]
    xs = [1, 2, 4]
    assert g1[:8] == (1, 3, 3, 3, 7, 7 / 3, 2, 7)
    assert g1[8] == 2 and g1[9] == pytest.approx(float(np.percentile(xs, 25)))
    assert g1[10] == pytest.approx(statistics.pvariance(xs))
    assert g1[11] == pytest.approx(statistics.variance(xs))
    assert g1[12] == pytest.approx(statistics.pstdev(xs))
    assert g1[13] == pytest.approx(statistics.correlation(xs, [2, 4, 7]))
    g2 = table.rows[1]
    assert g2[:8] == (2, 2, 1, 1, 5, 5.0, 1, 1)
    assert g2[11] is None and g2[13] is None


def test_empty_input_without_grouping_gives_one_row():
    cat = catalog_of(Relation.from_rows("r", [("x", AttributeType.INT64)], []))
    table, _ = naive_execute(parse_query("SELECT COUNT(*), SUM(x) FROM r", cat), cat)
    assert table.rows == [(0, None)]
    grouped, _ = naive_execute(parse_query("SELECT x, COUNT(*) FROM r GROUP BY x", cat), cat)
    assert grouped.rows == []


def test_cartesian_product_and_budget():
    I = AttributeType.INT64
    cat = catalog_of(Relation.from_rows("a", [("x", I)], [(i,) for i in range(30)]),
                     Relation.from_rows("b", [("y", I)], [(i,) for i in range(40)]))
    q = parse_query("SELECT COUNT(*) FROM a, b", cat)
    assert naive_execute(q, cat)[0].scalar() == 1200
    with pytest.raises(BudgetExceeded):
        naive_execute(q, cat, tuple_budget=1000)
    with pytest.raises(ValueError):
        naive_execute(q, cat, tuple_budget=0)


def _matrix_walks(edges, length):
    nodes = sorted({u for e in edges for u in e})
    pos = {u: i for i, u in enumerate(nodes)}
    A = np.zeros((len(nodes), len(nodes)), dtype=object)
    for u, v in edges:
        A[pos[u], pos[v]] += 1
    M = A
    for _ in range(length - 1):
        M = M.dot(A)
    return int(M.sum())


def test_walk_count_matches_matrix_power():
    rng = random.Random(5)
    for _ in range(20):
        g = random_graph(rng.randint(2, 30), rng.randint(1, 80), seed=rng.randrange(10 ** 6))
        for k in (1, 2, 3, 5):
            assert walk_count(g.rows, k) == _matrix_walks(g.rows, k)
    with pytest.raises(ValueError):
        walk_count([(1, 2)], 0)


def test_naive_path_count_equals_walk_count():
    g = random_graph(40, 120, seed=2)
    cat = catalog_of(g)
    for joins in (1, 2, 3):
        q = parse_query(path_query_sql(joins), cat)
        assert naive_execute(q, cat)[0].scalar() == walk_count(g.rows, joins + 1)
    assert walk_count(chain_graph(5).rows, 4) == 1
