"""Typed in-memory relations, file ingestion and key constraints.

NULL is represented by ``None``.  Relations are immutable once built; the
executor never mutates base rows.
"""
from __future__ import annotations

import csv
import enum
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConstraintError, ConstraintViolation, IngestionError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class AttributeType(enum.Enum):
    INT64 = "int64"
    FLOAT64 = "float64"
    TEXT = "text"
    BOOL = "bool"

    @classmethod
    def coerce(cls, value) -> "AttributeType":
        if isinstance(value, AttributeType):
            return value
        key = str(value).strip().lower()
        aliases = {
            "int": cls.INT64, "integer": cls.INT64, "bigint": cls.INT64, "int64": cls.INT64,
            "float": cls.FLOAT64, "double": cls.FLOAT64, "real": cls.FLOAT64, "float64": cls.FLOAT64,
            "text": cls.TEXT, "str": cls.TEXT, "string": cls.TEXT, "varchar": cls.TEXT,
            "bool": cls.BOOL, "boolean": cls.BOOL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown attribute type {value!r}") from None

    def parse(self, text: str):
        """Parse one CSV field; the empty string is NULL."""
        if text == "":
            return None
        if self is AttributeType.INT64:
            v = int(text.strip())
            if not INT64_MIN <= v <= INT64_MAX:
                raise ValueError(f"{text!r} out of int64 range")
            return v
        if self is AttributeType.FLOAT64:
            return float(text)
        if self is AttributeType.BOOL:
            t = text.strip().lower()
            if t in ("true", "t", "1"):
                return True
            if t in ("false", "f", "0"):
                return False
            raise ValueError(f"{text!r} is not a boolean")
        return text

    def accepts(self, value) -> bool:
        if value is None:
            return True
        if self is AttributeType.INT64:
            return isinstance(value, int) and not isinstance(value, bool)
        if self is AttributeType.FLOAT64:
            return isinstance(value, (int, float)) and not isinstance(value, bool)
        if self is AttributeType.BOOL:
            return isinstance(value, bool)
        return isinstance(value, str)


Schema = tuple[tuple[str, AttributeType], ...]


@dataclass(frozen=True)
class Relation:
    name: str
    schema: Schema
    rows: tuple[tuple, ...] = ()

    def __post_init__(self):
        schema = tuple((str(n), AttributeType.coerce(t)) for n, t in self.schema)
        names = [n for n, _ in schema]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute names in {self.name}: {names}")
        rows = tuple(tuple(r) for r in self.rows)
        for r in rows:
            if len(r) != len(schema):
                raise ValueError(
                    f"row {r!r} has arity {len(r)}, relation {self.name} has {len(schema)} attributes"
                )
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rows(cls, name: str, schema, rows: Iterable[Sequence]) -> "Relation":
        return cls(name, tuple(schema), tuple(tuple(r) for r in rows))

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.schema)

    @property
    def cardinality(self) -> int:
        return len(self.rows)

    def index(self, attribute: str) -> int:
        for i, (n, _) in enumerate(self.schema):
            if n == attribute:
                return i
        raise KeyError(f"relation {self.name} has no attribute {attribute!r}")

    def find_attribute(self, attribute: str) -> str | None:
        """Case-insensitive attribute lookup returning the stored spelling."""
        low = attribute.lower()
        for n, _ in self.schema:
            if n.lower() == low:
                return n
        return None

    def type_of(self, attribute: str) -> AttributeType:
        return self.schema[self.index(attribute)][1]


@dataclass(frozen=True)
class ForeignKey:
    relation: str
    attributes: tuple[str, ...]
    ref_relation: str
    ref_attributes: tuple[str, ...]

    def __str__(self):
        return (f"fk {self.relation}({', '.join(self.attributes)}) -> "
                f"{self.ref_relation}({', '.join(self.ref_attributes)})")


@dataclass(frozen=True)
class Constraints:
    unique: tuple[tuple[str, tuple[str, ...]], ...] = ()
    foreign_keys: tuple[ForeignKey, ...] = ()

    def __bool__(self):
        return bool(self.unique or self.foreign_keys)

    def unique_keys(self, relation: str) -> list[frozenset[str]]:
        return [frozenset(attrs) for rel, attrs in self.unique if rel == relation]

    def merged(self, other: "Constraints") -> "Constraints":
        return Constraints(
            tuple(dict.fromkeys(self.unique + other.unique)),
            tuple(dict.fromkeys(self.foreign_keys + other.foreign_keys)),
        )


_ATTR_LIST = r"\(\s*([^)]*?)\s*\)"
_UNIQUE_RE = re.compile(r"^(?:unique|pk|primary)\s+(\w+)\s*" + _ATTR_LIST + r"$", re.I)
_FK_RE = re.compile(r"^fk\s+(\w+)\s*" + _ATTR_LIST + r"\s*->\s*(\w+)\s*" + _ATTR_LIST + r"$", re.I)


def _split_attrs(text: str) -> tuple[str, ...]:
    return tuple(a.strip() for a in text.split(",") if a.strip())


def parse_constraints(text: str) -> Constraints:
    """Parse the declarative constraint format.

    Either JSON (a list of entry strings, or ``{"unique": [...], "fk": [...]}``)
    or one entry per line::

        unique region(r_regionkey)
        fk nation(n_regionkey) -> region(r_regionkey)

    ``#`` starts a comment.
    """
    stripped = text.strip()
    entries: list[str]
    if stripped.startswith("[") or stripped.startswith("{"):
        data = json.loads(stripped)
        if isinstance(data, dict):
            entries = [f"unique {e}" if not e.lower().startswith("unique") else e
                       for e in data.get("unique", [])]
            entries += [f"fk {e}" if not e.lower().startswith("fk") else e
                        for e in data.get("fk", data.get("foreign_keys", []))]
        else:
            entries = list(data)
    else:
        entries = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    unique, fks = [], []
    for n, entry in enumerate(entries, 1):
        if not entry:
            continue
        m = _UNIQUE_RE.match(entry)
        if m:
            unique.append((m.group(1), _split_attrs(m.group(2))))
            continue
        m = _FK_RE.match(entry)
        if m:
            fks.append(ForeignKey(m.group(1), _split_attrs(m.group(2)),
                                  m.group(3), _split_attrs(m.group(4))))
            continue
        raise ConstraintError(f"cannot parse constraint entry {n}: {entry!r}")
    return Constraints(tuple(unique), tuple(fks))


def load_constraints(path) -> Constraints:
    return parse_constraints(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Catalog:
    relations: dict[str, Relation] = field(default_factory=dict)
    constraints: Constraints = Constraints()

    def with_relation(self, relation: Relation) -> "Catalog":
        rels = dict(self.relations)
        rels[relation.name] = relation
        return replace(self, relations=rels)

    def find(self, name: str) -> Relation | None:
        if name in self.relations:
            return self.relations[name]
        low = name.lower()
        for k, r in self.relations.items():
            if k.lower() == low:
                return r
        return None

    def __getitem__(self, name: str) -> Relation:
        rel = self.find(name)
        if rel is None:
            raise KeyError(f"unknown relation {name!r}")
        return rel

    def __contains__(self, name: str) -> bool:
        return self.find(name) is not None

    def unique_keys(self, relation: str) -> list[frozenset[str]]:
        return self.constraints.unique_keys(relation)


def catalog_of(*relations: Relation, constraints: Constraints | None = None) -> Catalog:
    cat = Catalog({r.name: r for r in relations})
    if constraints:
        cat = register_constraints(cat, constraints)
    return cat


def _resolve_attrs(catalog: Catalog, rel_name: str, attrs, what: str) -> tuple[str, tuple[str, ...]]:
    rel = catalog.find(rel_name)
    if rel is None:
        raise ConstraintError(f"{what}: unknown relation {rel_name!r}")
    out = []
    for a in attrs:
        found = rel.find_attribute(a)
        if found is None:
            raise ConstraintError(f"{what}: relation {rel.name} has no attribute {a!r}")
        out.append(found)
    if not out:
        raise ConstraintError(f"{what}: empty attribute list")
    return rel.name, tuple(out)


def register_constraints(catalog: Catalog, constraints: Constraints) -> Catalog:
    """Attach constraints after checking names and unique keys against the data.

    Foreign keys must reference a declared unique key.  Referential integrity
    of foreign keys is not checked: only uniqueness is relied on downstream.
    """
    unique = []
    for rel_name, attrs in constraints.unique:
        name, attrs = _resolve_attrs(catalog, rel_name, attrs, "unique")
        rel = catalog[name]
        idx = [rel.index(a) for a in attrs]
        seen = set()
        for row in rel.rows:
            key = tuple(row[i] for i in idx)
            if any(v is None for v in key):
                continue
            if key in seen:
                raise ConstraintViolation(
                    f"unique {name}({', '.join(attrs)}) violated by duplicate key {key!r}"
                )
            seen.add(key)
        unique.append((name, attrs))
    all_unique = list(catalog.constraints.unique) + unique
    fks = []
    for fk in constraints.foreign_keys:
        rel, attrs = _resolve_attrs(catalog, fk.relation, fk.attributes, "fk")
        ref, ref_attrs = _resolve_attrs(catalog, fk.ref_relation, fk.ref_attributes, "fk")
        if len(attrs) != len(ref_attrs):
            raise ConstraintError(f"{fk}: attribute lists differ in length")
        if not any(r == ref and frozenset(a) == frozenset(ref_attrs) for r, a in all_unique):
            raise ConstraintError(f"{fk}: referenced attributes are not a declared unique key")
        fks.append(ForeignKey(rel, attrs, ref, ref_attrs))
    merged = catalog.constraints.merged(Constraints(tuple(unique), tuple(fks)))
    return replace(catalog, constraints=merged)


def _normalise_schema(schema) -> Schema | None:
    if schema is None:
        return None
    if isinstance(schema, dict):
        schema = list(schema.items())
    return tuple((str(n), AttributeType.coerce(t)) for n, t in schema)


def _infer_type(values: list[str]) -> AttributeType:
    present = [v for v in values if v != ""]
    for t in (AttributeType.INT64, AttributeType.FLOAT64, AttributeType.BOOL):
        try:
            for v in present:
                t.parse(v)
        except ValueError:
            continue
        if t is AttributeType.BOOL and not present:
            continue
        return t
    return AttributeType.TEXT


def load_csv(path, schema=None, name: str | None = None, header: bool | None = None) -> Relation:
    """Load a comma-separated file (doubled quotes escape quotes).

    With ``schema=None`` the first line is the header and column types are
    inferred (int64, then float64, then bool, else text).  With a schema, the
    first line is treated as a header iff it spells the schema's names;
    ``header`` forces either behaviour.
    """
    path = Path(path)
    name = name or path.stem
    schema = _normalise_schema(schema)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        lines = [(reader.line_num, rec) for rec in reader]
    lines = [(n, rec) for n, rec in lines if rec != []]
    if schema is None:
        if not lines:
            raise IngestionError("no header line and no schema given", path)
        names = [c.strip() for c in lines[0][1]]
        body = lines[1:]
        columns = list(zip(*[rec for _, rec in body])) if body else [[] for _ in names]
        for n, rec in body:
            if len(rec) != len(names):
                raise IngestionError(f"expected {len(names)} fields, got {len(rec)}", path, n)
        schema = tuple((nm, _infer_type(list(col))) for nm, col in zip(names, columns))
    else:
        names = [n for n, _ in schema]
        has_header = header
        if has_header is None:
            has_header = bool(lines) and [c.strip() for c in lines[0][1]] == names
        body = lines[1:] if has_header else lines
    types = [t for _, t in schema]
    rows = []
    for n, rec in body:
        if len(rec) != len(types):
            raise IngestionError(f"expected {len(types)} fields, got {len(rec)}", path, n)
        try:
            rows.append(tuple(t.parse(v) for t, v in zip(types, rec)))
        except ValueError as exc:
            raise IngestionError(str(exc), path, n) from None
    return Relation(name, schema, tuple(rows))


EDGE_SCHEMA: Schema = (("fromNode", AttributeType.INT64), ("toNode", AttributeType.INT64))


def load_edge_list(path, directed: bool = True, name: str = "edge") -> Relation:
    """Load a SNAP-style edge list; undirected graphs store both orientations.

    Self-loops and repeated edges are kept (bag semantics).
    """
    path = Path(path)
    rows = []
    with path.open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise IngestionError(f"expected 2 node ids, got {len(parts)}", path, n)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise IngestionError(f"non-integer node id in {text!r}", path, n) from None
            rows.append((u, v))
            if not directed:
                rows.append((v, u))
    return Relation(name, EDGE_SCHEMA, tuple(rows))


def write_csv(relation: Relation, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(relation.attributes)
        for row in relation.rows:
            w.writerow(["" if v is None else v for v in row])


def write_edge_list(relation: Relation, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for u, v in relation.rows:
            fh.write(f"{u}\t{v}\n")


def load_directory(path) -> Catalog:
    """Load every relation of a data directory.

    ``schema.json`` (optional) maps relation names to ``{"file", "columns"}``
    or ``{"edges", "directed"}``; otherwise every ``*.csv`` becomes a relation
    with inferred types and every ``*.edges``/``*.txt`` file an edge list.
    ``constraints.txt`` / ``constraints.json`` are registered when present.
    """
    root = Path(path)
    if not root.is_dir():
        raise IngestionError("data directory does not exist", root)
    catalog = Catalog()
    spec_file = root / "schema.json"
    if spec_file.exists():
        spec = json.loads(spec_file.read_text(encoding="utf-8"))
        for rel_name, entry in spec.get("relations", spec).items():
            if "edges" in entry:
                rel = load_edge_list(root / entry["edges"], entry.get("directed", True), rel_name)
            else:
                rel = load_csv(root / entry.get("file", f"{rel_name}.csv"),
                               entry.get("columns"), name=rel_name)
            catalog = catalog.with_relation(rel)
    else:
        for f in sorted(root.glob("*.csv")):
            catalog = catalog.with_relation(load_csv(f))
        for f in sorted(list(root.glob("*.edges")) + list(root.glob("*.txt"))):
            if f.name.startswith("constraints"):
                continue
            catalog = catalog.with_relation(load_edge_list(f, True, f.stem))
    for cname in ("constraints.txt", "constraints.json"):
        cfile = root / cname
        if cfile.exists():
            catalog = register_constraints(catalog, load_constraints(cfile))
    return catalog
