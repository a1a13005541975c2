"""Evaluation of guarded and piecewise-guarded acyclic aggregate queries by
propagating frequencies and partial aggregates along a join tree."""
from importlib import resources

from .catalog import (AttributeType, Catalog, Constraints, Relation, catalog_of, load_csv,
                      load_directory, load_edge_list, parse_constraints, register_constraints)
from .classifier import Classification, Kind, Reason, classify
from .engine import prepare, results_agree, run
from .errors import (BudgetExceeded, CyclicError, EngineError, NotSupported, ParseError,
                     PlanningError)
from .executor import ExecStats, ResultTable, execute
from .jointree import JoinTree, gyo_join_tree, reroot, to_hypergraph, verify_connectedness
from .plan import Mode, apply_fkpk, build_plan, explain
from .query import AggFunc, Query, parse_query, render_query


def data_path(*parts):
    """Path of a bundled data file or directory."""
    return resources.files(__name__).joinpath("data", *parts)


__all__ = [
    "AggFunc", "AttributeType", "BudgetExceeded", "Catalog", "Classification", "Constraints",
    "CyclicError", "EngineError", "ExecStats", "JoinTree", "Kind", "Mode", "NotSupported",
    "ParseError", "PlanningError", "Query", "Reason", "Relation", "ResultTable", "apply_fkpk",
    "build_plan", "catalog_of", "classify", "data_path", "execute", "explain", "gyo_join_tree",
    "load_csv", "load_directory", "load_edge_list", "parse_constraints", "parse_query",
    "prepare", "register_constraints", "render_query", "reroot", "results_agree", "run",
    "to_hypergraph", "verify_connectedness",
]
