"""End-to-end pipeline: parse, build the join tree, classify, plan, execute."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .baseline import naive_execute
from .catalog import Catalog, Constraints
from .classifier import Classification, classify, rooted_tree
from .errors import CyclicError, PlanningError
from .executor import ExecStats, ResultTable, execute
from .jointree import JoinTree, to_hypergraph, gyo_join_tree
from .plan import FinalAggregate, Mode, apply_fkpk, build_plan
from .query import Query, parse_query


@dataclass
class Prepared:
    query: Query
    tree: JoinTree | None
    classification: Classification

    @property
    def rooted(self) -> JoinTree:
        return rooted_tree(self.tree, self.classification)


def prepare(query, catalog: Catalog) -> Prepared:
    if isinstance(query, str):
        query = parse_query(query, catalog)
    try:
        tree = gyo_join_tree(to_hypergraph(query, catalog))
    except CyclicError as exc:
        return Prepared(query, None, classify(query, exc))
    return Prepared(query, tree, classify(query, tree))


def make_plan(prep: Prepared, mode=Mode.GUAO_PLUS, constraints: Constraints | None = None,
              prune: bool = True) -> FinalAggregate:
    if not prep.classification.applicable:
        raise PlanningError(f"query is {prep.classification.label}; {prep.classification.detail}")
    plan = build_plan(prep.query, prep.rooted, prep.classification, mode, prune=prune)
    if constraints:
        plan = apply_fkpk(plan, constraints)
    return plan


def run(query, catalog: Catalog, mode=Mode.GUAO_PLUS, variant: str = "hash",
        budget: int | None = None, fkpk: bool | Constraints = False, prune: bool = True,
        parallel: bool = False) -> tuple[ResultTable, ExecStats]:
    """Evaluate ``query`` in one of the three modes.  ``fkpk=True`` applies the
    catalog's registered constraints; a :class:`Constraints` value is used
    as given."""
    mode = Mode.parse(mode)
    prep = query if isinstance(query, Prepared) else prepare(query, catalog)
    if mode is Mode.BASELINE:
        return naive_execute(prep.query, catalog, budget)
    constraints = catalog.constraints if fkpk is True else (fkpk or None)
    plan = make_plan(prep, mode, constraints, prune)
    return execute(plan, catalog, mode, variant, budget=budget, parallel=parallel)


def values_agree(a, b, rel_tol: float = 1e-9) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) \
            and not isinstance(a, bool) and not isinstance(b, bool):
        if isinstance(a, int) and isinstance(b, int):
            return a == b
        return math.isclose(a, b, rel_tol=rel_tol, abs_tol=1e-12)
    return a == b


def results_agree(x: ResultTable, y: ResultTable, rel_tol: float = 1e-9) -> bool:
    """Exact on integers, ``rel_tol`` on floats; both tables are sorted on the
    group keys so rows are compared positionally."""
    if tuple(x.columns) != tuple(y.columns) or len(x.rows) != len(y.rows):
        return False
    return all(values_agree(a, b, rel_tol)
               for ra, rb in zip(x.rows, y.rows) for a, b in zip(ra, rb))
