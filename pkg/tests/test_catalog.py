import json

import pytest

from guardagg.catalog import (EDGE_SCHEMA, AttributeType, Catalog, Relation, catalog_of,
                              load_csv, load_directory, load_edge_list, parse_constraints,
                              register_constraints, write_csv)
from guardagg.errors import ConstraintError, ConstraintViolation, IngestionError

from conftest import DATA

I, T = AttributeType.INT64, AttributeType.TEXT


def test_csv_header_and_type_inference(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text('a,b,c,d\n1,x,1.5,true\n,"y,z",,false\n-7,"q""",2,\n')
    rel = load_csv(f)
    assert rel.name == "r"
    assert rel.schema == (("a", I), ("b", T), ("c", AttributeType.FLOAT64), ("d", AttributeType.BOOL))
    assert rel.rows == ((1, "x", 1.5, True), (None, "y,z", None, False), (-7, 'q"', 2.0, None))


def test_csv_with_schema_detects_header(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("k,v\n1,2\n")
    assert load_csv(f, [("k", "int"), ("v", "int")]).rows == ((1, 2),)
    g = tmp_path / "s.csv"
    g.write_text("1,2\n3,4\n")
    assert load_csv(g, {"k": "int64", "v": "int64"}).rows == ((1, 2), (3, 4))


def test_csv_errors(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("a,b\n1,2\n3\n")
    with pytest.raises(IngestionError, match=r"r\.csv:3:"):
        load_csv(f)
    g = tmp_path / "s.csv"
    g.write_text("1,x\n")
    with pytest.raises(IngestionError):
        load_csv(g, [("a", "int"), ("b", "int")])
    h = tmp_path / "big.csv"
    h.write_text(f"a\n{2 ** 63}\n")
    with pytest.raises(IngestionError):
        load_csv(h, [("a", "int")], header=True)


def test_round_trip_through_csv(tmp_path):
    rel = Relation.from_rows("r", [("a", I), ("b", T)], [(1, "x"), (None, "a,b"), (3, None)])
    write_csv(rel, tmp_path / "r.csv")
    back = load_csv(tmp_path / "r.csv", rel.schema)
    assert back.rows[:1] == rel.rows[:1] and back.rows[1] == (None, "a,b")
    # an empty text field reads back as NULL
    assert back.rows[2] == (3, None)


def test_edge_list_directed_and_undirected(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("# comment\n1\t2\n2 3\n\n3 3\n")
    assert load_edge_list(f).rows == ((1, 2), (2, 3), (3, 3))
    und = load_edge_list(f, directed=False)
    assert und.schema == EDGE_SCHEMA
    assert sorted(und.rows) == [(1, 2), (2, 1), (2, 3), (3, 2), (3, 3), (3, 3)]
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 3\n")
    with pytest.raises(IngestionError):
        load_edge_list(bad)


def test_relation_validation():
    with pytest.raises(ValueError):
        Relation.from_rows("r", [("a", I), ("a", I)], [])
    with pytest.raises(ValueError):
        Relation.from_rows("r", [("a", I)], [(1, 2)])
    rel = Relation.from_rows("r", [("Alpha", I)], [(1,)])
    assert rel.find_attribute("alpha") == "Alpha" and rel.find_attribute("beta") is None
    assert rel.cardinality == 1 and rel.type_of("Alpha") is I


def test_catalog_lookup_is_case_insensitive():
    cat = catalog_of(Relation.from_rows("Region", [("k", I)], []))
    assert cat["region"].name == "Region" and "REGION" in cat
    with pytest.raises(KeyError):
        cat["nation"]


def test_parse_constraints_text_and_json():
    text = "unique r(a, b)  # key\npk s(c)\nfk r(a) -> s(c)\n"
    c = parse_constraints(text)
    assert c.unique == (("r", ("a", "b")), ("s", ("c",)))
    assert str(c.foreign_keys[0]) == "fk r(a) -> s(c)"
    j = parse_constraints(json.dumps({"unique": ["s(c)"], "fk": ["r(a) -> s(c)"]}))
    assert j.unique == (("s", ("c",)),) and len(j.foreign_keys) == 1
    with pytest.raises(ConstraintError):
        parse_constraints("primary-ish r(a)")


def test_register_constraints_checks_uniqueness_and_references():
    r = Relation.from_rows("r", [("a", I)], [(1,), (1,), (None,)])
    s = Relation.from_rows("s", [("c", I)], [(1,), (None,), (None,)])
    cat = catalog_of(r, s)
    with pytest.raises(ConstraintViolation):
        register_constraints(cat, parse_constraints("unique r(a)"))
    ok = register_constraints(cat, parse_constraints("unique s(C)\nfk r(a) -> s(c)"))
    assert ok.unique_keys("s") == [frozenset({"c"})]
    with pytest.raises(ConstraintError, match="not a declared unique key"):
        register_constraints(cat, parse_constraints("fk s(c) -> r(a)"))
    with pytest.raises(ConstraintError, match="unknown relation"):
        register_constraints(cat, parse_constraints("unique q(a)"))
    with pytest.raises(ConstraintError, match="no attribute"):
        register_constraints(cat, parse_constraints("unique r(z)"))


def test_load_directory_bundled_data():
    cat = load_directory(DATA / "suppliers")
    assert set(cat.relations) == {"region", "nation", "supplier", "partsupp", "part"}
    assert cat["supplier"].cardinality == 6
    suite = load_directory(DATA / "suite")
    assert suite["edge"].schema == EDGE_SCHEMA
    with pytest.raises(IngestionError):
        load_directory(DATA / "missing")


def test_load_directory_with_schema_and_constraints(tmp_path):
    (tmp_path / "a.csv").write_text("1,x\n2,y\n")
    (tmp_path / "g.txt").write_text("1 2\n")
    (tmp_path / "schema.json").write_text(json.dumps({
        "t": {"file": "a.csv", "columns": [["k", "int"], ["v", "text"]]},
        "edge": {"edges": "g.txt", "directed": False}}))
    (tmp_path / "constraints.txt").write_text("unique t(k)\n")
    cat = load_directory(tmp_path)
    assert cat["t"].rows == ((1, "x"), (2, "y"))
    assert cat["edge"].cardinality == 2
    assert cat.unique_keys("t") == [frozenset({"k"})]
    assert isinstance(Catalog().constraints.unique, tuple)
