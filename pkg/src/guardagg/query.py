"""Aggregate queries over equi-joins and a parser for the supported SQL subset.

Grammar (keywords case-insensitive)::

    query     := SELECT item {, item} FROM atom {, atom}
                 [WHERE cond {AND cond}] [GROUP BY ref {, ref}] [;]
    item      := agg [[AS] name] | ref [[AS] name]
    agg       := COUNT(*) | COUNT([DISTINCT] expr) | SUM(expr) | AVG(expr)
               | MIN(expr) | MAX(expr) | MEDIAN(expr) | PERCENTILE(expr, p)
               | VARIANCE(expr) | STDDEV(expr) | VAR_SAMP(expr) | STDDEV_SAMP(expr)
               | CORR(expr, expr)
    atom      := relation [[AS] alias]
    cond      := ref = ref                      -- equi-join between atoms
               | ref op literal | literal op ref   -- op in = <> != < <= > >=
               | ref IN (literal {, literal})
               | ref BETWEEN literal AND literal
    expr      := arithmetic over refs and numeric literals (+ - * /)

Richer local predicates are the natural extension point: add a node to
:mod:`guardagg.expr` and a branch to ``_Parser._condition``.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .catalog import Catalog
from .errors import NotSupported, ParseError, ResolutionError
from .expr import (BinOp, Column, Comparison, Expr, InList, Literal, Neg, Predicate,
                   flip, refs, render_literal)


class AggFunc(enum.Enum):
    COUNT_STAR = "COUNT(*)"
    COUNT = "COUNT"
    COUNT_DISTINCT = "COUNT DISTINCT"
    SUM = "SUM"
    AVG = "AVG"
    MIN = "MIN"
    MAX = "MAX"
    MEDIAN = "MEDIAN"
    PERCENTILE = "PERCENTILE"
    VARIANCE = "VARIANCE"
    STDDEV = "STDDEV"
    CORR = "CORR"


SET_SAFE = frozenset({AggFunc.MIN, AggFunc.MAX, AggFunc.COUNT_DISTINCT})
# aggregates that may be guarded away from the root guard
PIECEWISE = frozenset({AggFunc.MIN, AggFunc.MAX, AggFunc.SUM, AggFunc.COUNT,
                       AggFunc.COUNT_STAR, AggFunc.AVG})


@dataclass(frozen=True)
class AggregateExpr:
    func: AggFunc
    args: tuple[Expr, ...] = ()
    alias: str = ""
    fraction: float | None = None
    sample: bool = False

    def __post_init__(self):
        n = len(self.args)
        if self.func is AggFunc.COUNT_STAR and n:
            raise ValueError("COUNT(*) takes no argument")
        if self.func is AggFunc.CORR and n != 2:
            raise ValueError("CORR takes exactly two arguments")
        if self.func not in (AggFunc.COUNT_STAR, AggFunc.CORR) and n != 1:
            raise ValueError(f"{self.func.value} takes exactly one argument")
        if self.func is AggFunc.PERCENTILE:
            if self.fraction is None or not 0.0 <= self.fraction <= 1.0:
                raise ValueError("PERCENTILE fraction must lie in [0, 1]")

    @property
    def columns(self) -> list[Column]:
        out = []
        for a in self.args:
            for r in refs(a):
                if r not in out:
                    out.append(r)
        return out

    def sql(self) -> str:
        f = self.func
        if f is AggFunc.COUNT_STAR:
            return "COUNT(*)"
        args = [render_expr(a) for a in self.args]
        if f is AggFunc.COUNT_DISTINCT:
            return f"COUNT(DISTINCT {args[0]})"
        if f is AggFunc.PERCENTILE:
            return f"PERCENTILE({args[0]}, {self.fraction!r})"
        if f is AggFunc.VARIANCE and self.sample:
            return f"VAR_SAMP({args[0]})"
        if f is AggFunc.STDDEV and self.sample:
            return f"STDDEV_SAMP({args[0]})"
        return f"{f.value}({', '.join(args)})"


@dataclass(frozen=True)
class QueryAtom:
    relation: str
    alias: str
    predicates: tuple[Predicate, ...] = ()


@dataclass(frozen=True)
class JoinCondition:
    left: Column
    right: Column

    def __str__(self):
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class SelectItem:
    kind: str  # "group" or "agg"
    index: int
    name: str


@dataclass(frozen=True)
class Query:
    atoms: tuple[QueryAtom, ...]
    joins: tuple[JoinCondition, ...] = ()
    group_by: tuple[Column, ...] = ()
    aggregates: tuple[AggregateExpr, ...] = ()
    select: tuple[SelectItem, ...] = field(default=())

    def __post_init__(self):
        aliases = [a.alias for a in self.atoms]
        if len(set(aliases)) != len(aliases):
            raise ValueError(f"duplicate atom aliases: {aliases}")
        if not self.aggregates:
            raise ValueError("a query needs at least one aggregate")
        for j in self.joins:
            if j.left.atom == j.right.atom:
                raise ValueError(f"join condition {j} does not span two atoms")
        if not self.select:
            items = [SelectItem("agg", i, a.alias or _default_name(a))
                     for i, a in enumerate(self.aggregates)]
            object.__setattr__(self, "select", tuple(items))

    def atom_index(self, alias: str) -> int:
        for i, a in enumerate(self.atoms):
            if a.alias == alias:
                return i
        raise KeyError(alias)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.select)


def _default_name(agg: AggregateExpr) -> str:
    if agg.func in (AggFunc.COUNT_STAR, AggFunc.COUNT_DISTINCT):
        return "count"
    return agg.func.name.lower()


# -- rendering -----------------------------------------------------------------

def render_expr(expr: Expr) -> str:
    if isinstance(expr, Column):
        return f"{expr.atom}.{expr.name}"
    if isinstance(expr, Literal):
        return render_literal(expr.value)
    if isinstance(expr, Neg):
        return f"(-{render_expr(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({render_expr(expr.left)} {expr.op} {render_expr(expr.right)})"
    return str(expr)


def render_query(q: Query) -> str:
    """Render ``q`` as SQL that :func:`parse_query` maps back to ``q``."""
    items = []
    for s in q.select:
        if s.kind == "group":
            items.append(f"{render_expr(q.group_by[s.index])} AS {s.name}")
        else:
            items.append(f"{q.aggregates[s.index].sql()} AS {s.name}")
    parts = ["SELECT " + ", ".join(items),
             "FROM " + ", ".join(f"{a.relation} {a.alias}" for a in q.atoms)]
    conds = [str(j) for j in q.joins]
    conds += [str(p) for a in q.atoms for p in a.predicates]
    if conds:
        parts.append("WHERE " + "\n  AND ".join(conds))
    if q.group_by:
        parts.append("GROUP BY " + ", ".join(render_expr(g) for g in q.group_by))
    return "\n".join(parts)


# -- tokenizer -------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|--[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><>|!=|<=|>=|[=<>(),.*+\-/;])
""", re.X)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int

    @property
    def upper(self):
        return self.text.upper()


def _tokenize(text: str) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


_AGG_NAMES = {
    "COUNT": AggFunc.COUNT, "SUM": AggFunc.SUM, "AVG": AggFunc.AVG, "MIN": AggFunc.MIN,
    "MAX": AggFunc.MAX, "MEDIAN": AggFunc.MEDIAN, "PERCENTILE": AggFunc.PERCENTILE,
    "VARIANCE": AggFunc.VARIANCE, "VAR_POP": AggFunc.VARIANCE, "VAR_SAMP": AggFunc.VARIANCE,
    "STDDEV": AggFunc.STDDEV, "STDDEV_POP": AggFunc.STDDEV, "STDDEV_SAMP": AggFunc.STDDEV,
    "CORR": AggFunc.CORR,
}
_RESERVED = {"SELECT", "FROM", "WHERE", "GROUP", "BY", "AND", "OR", "NOT", "IN", "AS",
             "ORDER", "HAVING", "LIMIT", "UNION", "JOIN", "ON", "BETWEEN", "DISTINCT",
             "INNER", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS", "INTERSECT", "EXCEPT",
             "NULL", "TRUE", "FALSE", "IS"}
_UNSUPPORTED_CLAUSES = {"ORDER": "ORDER BY", "HAVING": "HAVING", "LIMIT": "LIMIT",
                        "UNION": "set operations", "INTERSECT": "set operations",
                        "EXCEPT": "set operations", "JOIN": "explicit JOIN syntax",
                        "INNER": "explicit JOIN syntax", "LEFT": "outer joins",
                        "RIGHT": "outer joins", "FULL": "outer joins", "CROSS": "explicit JOIN syntax"}


@dataclass
class _RawRef:
    qualifier: str | None
    name: str
    pos: int


class _Parser:
    def __init__(self, text: str, catalog: Catalog | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.catalog = catalog

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> _Tok:
        t = self.tok
        self.i += 1
        return t

    def at(self, *words) -> bool:
        t = self.tok
        return t.kind in ("ident", "op") and t.upper in words

    def expect(self, word: str) -> _Tok:
        if not self.at(word):
            self.fail(f"expected {word!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def fail(self, msg, pos=None):
        raise ParseError(msg, self.tok.pos if pos is None else pos)

    def check_unsupported(self):
        t = self.tok
        if t.kind == "ident" and t.upper in _UNSUPPORTED_CLAUSES:
            raise NotSupported(_UNSUPPORTED_CLAUSES[t.upper], t.pos)

    def ident(self, what="identifier") -> _Tok:
        t = self.tok
        if t.kind != "ident" or t.upper in _RESERVED:
            self.check_unsupported()
            self.fail(f"expected {what}, found {t.text or 'end of input'!r}")
        return self.advance()

    def check_subquery(self):
        if self.at("(") and self.peek().kind == "ident" and self.peek().upper == "SELECT":
            raise NotSupported("subquery (decorrelate it first)", self.tok.pos)

    # grammar
    def parse(self) -> Query:
        self.expect("SELECT")
        raw_items = [self.select_item()]
        while self.at(","):
            self.advance()
            raw_items.append(self.select_item())
        self.check_unsupported()
        self.expect("FROM")
        atoms = [self.atom()]
        while self.at(","):
            self.advance()
            atoms.append(self.atom())
        self.check_unsupported()
        aliases = {}
        for a, pos in atoms:
            key = a.alias.lower()
            if key in aliases:
                raise ParseError(f"duplicate alias {a.alias!r}", pos)
            aliases[key] = a
        self.atoms = [a for a, _ in atoms]
        raw_conds = []
        if self.at("WHERE"):
            self.advance()
            raw_conds.extend(self.condition())
            while self.at("AND"):
                self.advance()
                raw_conds.extend(self.condition())
            if self.at("OR"):
                raise NotSupported("disjunction", self.tok.pos)
        self.check_unsupported()
        raw_groups = []
        if self.at("GROUP"):
            self.advance()
            self.expect("BY")
            raw_groups.append(self.raw_ref())
            while self.at(","):
                self.advance()
                raw_groups.append(self.raw_ref())
        self.check_unsupported()
        if self.at(";"):
            self.advance()
        if self.tok.kind != "eof":
            self.check_unsupported()
            self.fail(f"unexpected {self.tok.text!r}")
        return self.build(raw_items, raw_conds, raw_groups)

    def select_item(self):
        self.check_subquery()
        t = self.tok
        if t.kind == "ident" and t.upper in _AGG_NAMES and self.peek().text == "(":
            item = ("agg", self.aggregate(), t.pos)
        else:
            item = ("group", self.raw_ref(), t.pos)
        name = None
        if self.at("AS"):
            self.advance()
            name = self.advance()
            if name.kind != "ident":
                self.fail("expected output name", name.pos)
            name = name.text
        elif self.tok.kind == "ident" and self.tok.upper not in _RESERVED:
            name = self.advance().text
        return item + (name,)

    def aggregate(self):
        t = self.advance()
        word = t.upper
        func = _AGG_NAMES[word]
        self.expect("(")
        self.check_subquery()
        distinct = False
        fraction = None
        if func is AggFunc.COUNT and self.at("*"):
            self.advance()
            self.expect(")")
            return (AggFunc.COUNT_STAR, (), None, False, t.pos)
        if self.at("DISTINCT"):
            if func is not AggFunc.COUNT:
                raise NotSupported(f"DISTINCT inside {word}", self.tok.pos)
            self.advance()
            distinct = True
        args = [self.expr()]
        if func is AggFunc.CORR:
            self.expect(",")
            args.append(self.expr())
        elif func is AggFunc.PERCENTILE:
            self.expect(",")
            ftok = self.advance()
            if ftok.kind != "number":
                self.fail("PERCENTILE fraction must be a numeric literal", ftok.pos)
            fraction = float(ftok.text)
            if not 0.0 <= fraction <= 1.0:
                raise ParseError("PERCENTILE fraction must lie in [0, 1]", ftok.pos)
        self.expect(")")
        if distinct:
            func = AggFunc.COUNT_DISTINCT
        sample = word in ("VAR_SAMP", "STDDEV_SAMP")
        return (func, tuple(args), fraction, sample, t.pos)

    def atom(self):
        self.check_subquery()
        t = self.ident("relation name")
        alias = t.text
        if self.at("AS"):
            self.advance()
            alias = self.ident("alias").text
        elif self.tok.kind == "ident" and self.tok.upper not in _RESERVED:
            alias = self.advance().text
        rel_name = t.text
        if self.catalog is not None:
            rel = self.catalog.find(t.text)
            if rel is None:
                raise ResolutionError(f"unknown relation {t.text!r}", t.pos)
            rel_name = rel.name
        return QueryAtom(rel_name, alias), t.pos

    def raw_ref(self) -> _RawRef:
        t = self.ident("attribute")
        if self.at("."):
            self.advance()
            n = self.ident("attribute")
            return _RawRef(t.text, n.text, t.pos)
        return _RawRef(None, t.text, t.pos)

    def literal(self):
        t = self.tok
        neg = False
        if t.text == "-" and self.peek().kind == "number":
            self.advance()
            neg = True
            t = self.tok
        if t.kind == "number":
            self.advance()
            v = float(t.text) if any(c in t.text for c in ".eE") else int(t.text)
            return -v if neg else v
        if t.kind == "string":
            self.advance()
            return t.text[1:-1].replace("''", "'")
        if t.kind == "ident" and t.upper in ("TRUE", "FALSE"):
            self.advance()
            return t.upper == "TRUE"
        if t.kind == "ident" and t.upper == "NULL":
            raise NotSupported("NULL literal in predicate (use IS NULL semantics)", t.pos)
        self.fail("expected a literal")

    def is_literal_start(self) -> bool:
        t = self.tok
        if t.kind in ("number", "string"):
            return True
        if t.text == "-" and self.peek().kind == "number":
            return True
        return t.kind == "ident" and t.upper in ("TRUE", "FALSE", "NULL")

    def operand(self):
        self.check_subquery()
        if self.is_literal_start():
            return ("lit", self.literal(), self.tok.pos)
        t = self.tok
        if t.kind == "ident":
            return ("ref", self.raw_ref(), t.pos)
        self.fail("expected attribute or literal")

    def condition(self):
        self.check_subquery()
        if self.at("("):
            # parenthesised conjunction
            self.advance()
            out = self.condition()
            while self.at("AND"):
                self.advance()
                out.extend(self.condition())
            if self.at("OR"):
                raise NotSupported("disjunction", self.tok.pos)
            self.expect(")")
            return out
        if self.at("NOT"):
            raise NotSupported("negated predicate", self.tok.pos)
        start = self.tok.pos
        left = self.operand()
        if self.at("IS"):
            raise NotSupported("IS [NOT] NULL predicate", self.tok.pos)
        if self.at("NOT"):
            raise NotSupported("NOT IN / NOT BETWEEN", self.tok.pos)
        if self.at("IN"):
            self.advance()
            if left[0] != "ref":
                self.fail("IN needs an attribute on the left", start)
            self.check_subquery()
            self.expect("(")
            values = [self.literal()]
            while self.at(","):
                self.advance()
                values.append(self.literal())
            self.expect(")")
            return [("in", left[1], tuple(values), start)]
        if self.at("BETWEEN"):
            self.advance()
            if left[0] != "ref":
                self.fail("BETWEEN needs an attribute on the left", start)
            lo = self.literal()
            self.expect("AND")
            hi = self.literal()
            return [("cmp", left, ">=", ("lit", lo, start), start),
                    ("cmp", left, "<=", ("lit", hi, start), start)]
        t = self.tok
        if t.kind == "op" and t.text in ("+", "-", "*", "/"):
            raise NotSupported("arithmetic in predicates", t.pos)
        if t.kind != "op" or t.text not in ("=", "<>", "!=", "<", "<=", ">", ">="):
            self.fail(f"expected comparison operator, found {t.text!r}")
        self.advance()
        op = "<>" if t.text == "!=" else t.text
        right = self.operand()
        if self.tok.kind == "op" and self.tok.text in ("+", "-", "*", "/"):
            raise NotSupported("arithmetic in predicates", self.tok.pos)
        return [("cmp", left, op, right, start)]

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        t = self.tok
        if t.text == "-" and t.kind == "op":
            if self.peek().kind == "number":
                return Literal(self.literal())
            self.advance()
            return Neg(self.factor())
        if t.kind == "number":
            return Literal(self.literal())
        if t.text == "(":
            self.check_subquery()
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "ident":
            return self.raw_ref()
        self.fail("expected expression")

    # resolution
    def resolve(self, raw: _RawRef) -> Column:
        if raw.qualifier is not None:
            atom = next((a for a in self.atoms if a.alias.lower() == raw.qualifier.lower()), None)
            if atom is None:
                raise ResolutionError(f"unknown alias {raw.qualifier!r}", raw.pos)
            if self.catalog is None:
                return Column(atom.alias, raw.name)
            found = self.catalog[atom.relation].find_attribute(raw.name)
            if found is None:
                raise ResolutionError(f"{atom.alias} has no attribute {raw.name!r}", raw.pos)
            return Column(atom.alias, found)
        if self.catalog is None:
            raise ResolutionError(f"unqualified attribute {raw.name!r} needs a catalog", raw.pos)
        hits = []
        for a in self.atoms:
            found = self.catalog[a.relation].find_attribute(raw.name)
            if found is not None:
                hits.append(Column(a.alias, found))
        if not hits:
            raise ResolutionError(f"unresolved attribute {raw.name!r}", raw.pos)
        if len(hits) > 1:
            raise ResolutionError(
                f"ambiguous attribute {raw.name!r} (in {', '.join(h.atom for h in hits)})", raw.pos)
        return hits[0]

    def resolve_expr(self, e):
        if isinstance(e, _RawRef):
            return self.resolve(e)
        if isinstance(e, BinOp):
            return BinOp(e.op, self.resolve_expr(e.left), self.resolve_expr(e.right))
        if isinstance(e, Neg):
            return Neg(self.resolve_expr(e.operand))
        return e

    def build(self, raw_items, raw_conds, raw_groups) -> Query:
        group_by = []
        for g in raw_groups:
            col = self.resolve(g)
            if col not in group_by:
                group_by.append(col)
        aggregates, select, used = [], [], set()

        def unique_name(base):
            name, k = base, 2
            while name.lower() in used:
                name, k = f"{base}_{k}", k + 1
            used.add(name.lower())
            return name

        for kind, payload, pos, name in raw_items:
            if kind == "group":
                col = self.resolve(payload)
                if col not in group_by:
                    raise ParseError(f"{col} must appear in GROUP BY", pos)
                select.append(SelectItem("group", group_by.index(col), unique_name(name or col.name)))
            else:
                func, args, fraction, sample, apos = payload
                args = tuple(self.resolve_expr(a) for a in args)
                try:
                    agg = AggregateExpr(func, args, "", fraction, sample)
                except ValueError as exc:
                    raise ParseError(str(exc), apos) from None
                nm = unique_name(name or _default_name(agg))
                aggregates.append(AggregateExpr(func, args, nm, fraction, sample))
                select.append(SelectItem("agg", len(aggregates) - 1, nm))
        if not aggregates:
            raise NotSupported("query without aggregates")
        joins = []
        preds: dict[str, list] = {a.alias: [] for a in self.atoms}
        for cond in raw_conds:
            if cond[0] == "in":
                col = self.resolve(cond[1])
                preds[col.atom].append(InList(col, cond[2]))
                continue
            _, left, op, right, pos = cond
            if left[0] == "ref" and right[0] == "ref":
                lc, rc = self.resolve(left[1]), self.resolve(right[1])
                if lc.atom == rc.atom:
                    raise NotSupported("comparison between attributes of one atom", pos)
                if op != "=":
                    raise NotSupported("theta-join", pos)
                joins.append(JoinCondition(lc, rc))
            elif left[0] == "ref":
                col = self.resolve(left[1])
                preds[col.atom].append(Comparison(col, op, right[1]))
            elif right[0] == "ref":
                col = self.resolve(right[1])
                preds[col.atom].append(Comparison(col, flip(op), left[1]))
            else:
                raise NotSupported("comparison between two constants", pos)
        atoms = tuple(QueryAtom(a.relation, a.alias, tuple(preds[a.alias])) for a in self.atoms)
        return Query(atoms, tuple(joins), tuple(group_by), tuple(aggregates), tuple(select))


def parse_query(text: str, catalog: Catalog | None = None) -> Query:
    """Parse and resolve one statement.  Without a catalog every attribute
    reference must be alias-qualified and relation names are taken verbatim."""
    return _Parser(text, catalog).parse()


def load_query(path, catalog: Catalog | None = None) -> Query:
    from pathlib import Path
    return parse_query(Path(path).read_text(encoding="utf-8"), catalog)
