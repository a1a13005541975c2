"""Membership tests for the supported query fragments and guard assignment.

Fragments, from strongest to weakest:

* ``ZERO_MA``: guarded and every aggregate is set-safe (MIN, MAX,
  COUNT DISTINCT); semi-joins alone suffice.
* ``GUARDED``: a single atom holds every grouping and aggregate attribute.
* ``PIECEWISE_GUARDED``: one atom (the root guard) holds the grouping
  attributes and all attributes of non-decomposable aggregates; each
  MIN/MAX/SUM/COUNT/AVG aggregate is held by some atom.

Guard ties are broken by the smallest atom index.  The guard of an aggregate
in the piecewise case is the covering node closest to the root guard; the
covering nodes form a connected subtree, so it is unique.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import CyclicError
from .jointree import JoinTree, reroot
from .query import PIECEWISE, SET_SAFE, AggregateExpr, Query


class Kind(enum.Enum):
    ZERO_MA = "0ma"
    GUARDED = "guarded"
    PIECEWISE_GUARDED = "piecewise-guarded"
    NOT_APPLICABLE = "not-applicable"


class Reason(enum.Enum):
    CYCLIC = "cyclic"
    UNGUARDED_AGGREGATE = "unguarded-aggregate"
    UNGUARDED_GROUPING = "unguarded-grouping"
    NON_ROOT_STATISTICAL_AGGREGATE = "non-root-statistical-aggregate"


@dataclass(frozen=True)
class GuardAssignment:
    root_guard: int
    aggregate_guards: tuple[int, ...]


@dataclass(frozen=True)
class Classification:
    kind: Kind
    guards: GuardAssignment | None = None
    reason: Reason | None = None
    detail: str = ""

    @property
    def applicable(self) -> bool:
        return self.kind is not Kind.NOT_APPLICABLE

    @property
    def label(self) -> str:
        if self.kind is Kind.NOT_APPLICABLE:
            return f"not-applicable: {self.reason.value}"
        return self.kind.value

    def to_json(self, tree: JoinTree | None = None) -> dict:
        out = {"class": self.kind.value}
        if self.reason is not None:
            out["reason"] = self.reason.value
        if self.detail:
            out["detail"] = self.detail
        if self.guards is not None:
            name = (lambda u: tree.names[u]) if tree is not None else (lambda u: u)
            out["root_guard"] = name(self.guards.root_guard)
            out["aggregate_guards"] = [name(g) for g in self.guards.aggregate_guards]
        return out


def _vars(tree: JoinTree, columns) -> frozenset[str]:
    return frozenset(tree.hypergraph.var(c) for c in columns)


def _covering(tree: JoinTree, needed: frozenset[str]) -> list[int]:
    return [u for u in range(tree.size) if needed <= tree.label(u)]


def _aggregate_vars(tree: JoinTree, agg: AggregateExpr) -> frozenset[str]:
    return _vars(tree, agg.columns)


def classify(query: Query, tree) -> Classification:
    """``tree`` is the join tree of ``query`` or the :class:`CyclicError`
    obtained while building it."""
    if isinstance(tree, CyclicError):
        return Classification(Kind.NOT_APPLICABLE, reason=Reason.CYCLIC, detail=str(tree))
    group = _vars(tree, query.group_by)
    agg_vars = [_aggregate_vars(tree, a) for a in query.aggregates]

    everything = group.union(*agg_vars)
    guards = _covering(tree, everything)
    if guards:
        g = guards[0]
        assignment = GuardAssignment(g, tuple(g for _ in query.aggregates))
        if all(a.func in SET_SAFE for a in query.aggregates):
            return Classification(Kind.ZERO_MA, assignment)
        return Classification(Kind.GUARDED, assignment)

    for a, needed in zip(query.aggregates, agg_vars):
        if not _covering(tree, needed):
            return Classification(Kind.NOT_APPLICABLE, reason=Reason.UNGUARDED_AGGREGATE,
                                  detail=f"no atom holds all attributes of {a.sql()}")
    if not _covering(tree, group):
        return Classification(Kind.NOT_APPLICABLE, reason=Reason.UNGUARDED_GROUPING,
                              detail="no atom holds all grouping attributes")
    rooted_needed = group.union(*(v for a, v in zip(query.aggregates, agg_vars)
                                  if a.func not in PIECEWISE))
    roots = _covering(tree, rooted_needed)
    if not roots:
        bad = [a.sql() for a in query.aggregates if a.func not in PIECEWISE]
        return Classification(Kind.NOT_APPLICABLE,
                              reason=Reason.NON_ROOT_STATISTICAL_AGGREGATE,
                              detail=f"{', '.join(bad)} cannot share an atom with the grouping")
    root = roots[0]
    rooted = reroot(tree, root)
    per_agg = []
    for needed in agg_vars:
        cover = _covering(rooted, needed)
        per_agg.append(min(cover, key=lambda u: (rooted.depth(u), u)))
    return Classification(Kind.PIECEWISE_GUARDED, GuardAssignment(root, tuple(per_agg)))


def rooted_tree(tree: JoinTree, cls: Classification) -> JoinTree:
    """The tree re-rooted at the root guard, as planning requires."""
    if cls.guards is None:
        raise ValueError(f"classification {cls.label} has no guards")
    return reroot(tree, cls.guards.root_guard)


# Stand-alone predicates, implemented directly from the definitions so they
# can cross-check :func:`classify`.

def is_guarded(query: Query, tree: JoinTree) -> bool:
    needed = set(_vars(tree, query.group_by))
    for a in query.aggregates:
        needed |= _aggregate_vars(tree, a)
    return any(needed <= tree.label(u) for u in range(tree.size))


def is_zero_ma(query: Query, tree: JoinTree) -> bool:
    return is_guarded(query, tree) and all(a.func in SET_SAFE for a in query.aggregates)


def is_piecewise_guarded(query: Query, tree: JoinTree) -> bool:
    group = _vars(tree, query.group_by)
    for u in range(tree.size):
        label = tree.label(u)
        if not group <= label:
            continue
        ok = True
        for a in query.aggregates:
            need = _aggregate_vars(tree, a)
            if a.func in PIECEWISE:
                ok = any(need <= tree.label(w) for w in range(tree.size))
            else:
                ok = need <= label
            if not ok:
                break
        if ok:
            return True
    return False
