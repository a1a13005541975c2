import json

import pytest

from guardagg.classifier import (Classification, Kind, Reason, classify, is_guarded,
                                 is_piecewise_guarded, is_zero_ma, rooted_tree)
from guardagg.engine import prepare
from guardagg.catalog import load_directory

from conftest import DATA


@pytest.fixture(scope="module")
def suite():
    return load_directory(DATA / "suite")


def _cls(sql, catalog):
    return prepare(sql, catalog).classification


def test_guarded_example(suppliers, median_sql):
    prep = prepare(median_sql, suppliers)
    c = prep.classification
    assert c.kind is Kind.GUARDED and c.applicable
    assert prep.tree.names[c.guards.root_guard] == "supplier"
    assert c.to_json(prep.tree) == {"class": "guarded", "root_guard": "supplier",
                                    "aggregate_guards": ["supplier"]}
    assert rooted_tree(prep.tree, c).root == c.guards.root_guard


def test_piecewise_example_guards(suppliers_xy, piecewise_sql):
    prep = prepare(piecewise_sql, suppliers_xy)
    c = prep.classification
    assert c.label == "piecewise-guarded"
    assert c.to_json(prep.tree) == {"class": "piecewise-guarded", "root_guard": "supplier",
                                    "aggregate_guards": ["region", "part"]}


@pytest.mark.parametrize("sql,label", [
    ("SELECT MIN(s_acctbal), MAX(s_suppkey) FROM supplier, nation "
     "WHERE s_nationkey = n_nationkey", "0ma"),
    ("SELECT COUNT(DISTINCT s_acctbal) FROM supplier, nation "
     "WHERE s_nationkey = n_nationkey GROUP BY s_nationkey", "0ma"),
    ("SELECT COUNT(*) FROM supplier, nation WHERE s_nationkey = n_nationkey", "guarded"),
    ("SELECT n_regionkey, SUM(n_nationkey) FROM supplier, nation "
     "WHERE s_nationkey = n_nationkey GROUP BY n_regionkey", "guarded"),
    ("SELECT s_nationkey, AVG(r_x), COUNT(p_y) FROM part, partsupp, supplier, nation, region "
     "WHERE p_partkey = ps_partkey AND s_suppkey = ps_suppkey AND n_nationkey = s_nationkey "
     "AND r_regionkey = n_regionkey GROUP BY s_nationkey", "piecewise-guarded"),
    ("SELECT MEDIAN(r_x), SUM(p_y) FROM part, partsupp, supplier, nation, region "
     "WHERE p_partkey = ps_partkey AND s_suppkey = ps_suppkey AND n_nationkey = s_nationkey "
     "AND r_regionkey = n_regionkey", "piecewise-guarded"),
    ("SELECT s_nationkey, MEDIAN(r_x) FROM supplier, nation, region "
     "WHERE n_nationkey = s_nationkey AND r_regionkey = n_regionkey GROUP BY s_nationkey",
     "not-applicable: non-root-statistical-aggregate"),
    ("SELECT s_nationkey, COUNT(DISTINCT r_x) FROM supplier, nation, region "
     "WHERE n_nationkey = s_nationkey AND r_regionkey = n_regionkey GROUP BY s_nationkey",
     "not-applicable: non-root-statistical-aggregate"),
    ("SELECT SUM(s_acctbal * r_x) FROM supplier, nation, region "
     "WHERE n_nationkey = s_nationkey AND r_regionkey = n_regionkey",
     "not-applicable: unguarded-aggregate"),
    ("SELECT CORR(s_acctbal, r_x) FROM supplier, nation, region "
     "WHERE n_nationkey = s_nationkey AND r_regionkey = n_regionkey",
     "not-applicable: unguarded-aggregate"),
    ("SELECT s_acctbal, r_x, COUNT(*) FROM supplier, nation, region "
     "WHERE n_nationkey = s_nationkey AND r_regionkey = n_regionkey GROUP BY s_acctbal, r_x",
     "not-applicable: unguarded-grouping"),
])
def test_labels(suppliers_xy, sql, label):
    assert _cls(sql, suppliers_xy).label == label


def test_cyclic_queries(suite):
    sql = (DATA / "suite" / "queries" / "04_triangle.sql").read_text()
    c = _cls(sql, suite)
    assert c.kind is Kind.NOT_APPLICABLE and c.reason is Reason.CYCLIC
    assert not c.applicable and c.guards is None
    assert json.loads(json.dumps(c.to_json()))["reason"] == "cyclic"
    with pytest.raises(ValueError):
        rooted_tree(None, c)


def test_guard_prefers_shallow_then_low_index(suppliers_xy):
    # both nation and supplier hold s_nationkey / n_nationkey; the root guard
    # is the lowest-index covering atom, aggregate guards prefer shallow nodes
    sql = ("SELECT s_nationkey, MAX(n_regionkey), SUM(n_nationkey) FROM supplier, nation, region "
           "WHERE n_nationkey = s_nationkey AND r_regionkey = n_regionkey GROUP BY s_nationkey")
    prep = prepare(sql, suppliers_xy)
    c = prep.classification
    assert c.kind is Kind.GUARDED
    assert prep.tree.names[c.guards.root_guard] == "nation"


def test_predicates_agree_with_classify_on_suite(suite):
    expected = json.loads((DATA / "suite" / "expected.json").read_text())
    for name, label in expected.items():
        prep = prepare((DATA / "suite" / "queries" / name).read_text(), suite)
        if prep.tree is None:
            continue
        q, t = prep.query, prep.tree
        assert is_zero_ma(q, t) == (label == "0ma"), name
        assert is_guarded(q, t) == (label in ("0ma", "guarded")), name
        assert is_piecewise_guarded(q, t) == (label in ("0ma", "guarded", "piecewise-guarded")), name


def test_classification_is_a_value():
    c = Classification(Kind.ZERO_MA)
    assert c.label == "0ma" and c.to_json() == {"class": "0ma"}
