"""Scalar expressions and local selection predicates.

Expressions are built over :class:`Column` (alias-qualified attributes, used
by the query model) or :class:`Var` (canonical join variables, used inside
plans).  Arithmetic propagates NULL; division always yields a float.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Callable, Union

from .errors import EvaluationError


@dataclass(frozen=True)
class Column:
    atom: str
    name: str

    def __str__(self):
        return f"{self.atom}.{self.name}"


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Literal:
    value: object

    def __str__(self):
        return render_literal(self.value)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"

    def __str__(self):
        return f"(-{self.operand})"


Expr = Union[Column, Var, Literal, BinOp, Neg]
Ref = Union[Column, Var]

ARITH_OPS = ("+", "-", "*", "/")


def render_literal(value) -> str:
    if value is None:
        return "NULL"
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    return repr(value)


def refs(expr: Expr) -> list[Ref]:
    """Column/Var references in left-to-right order, without duplicates."""
    out: list[Ref] = []

    def walk(e):
        if isinstance(e, (Column, Var)):
            if e not in out:
                out.append(e)
        elif isinstance(e, BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Neg):
            walk(e.operand)

    walk(expr)
    return out


def substitute(expr: Expr, fn: Callable[[Ref], Expr]) -> Expr:
    if isinstance(expr, (Column, Var)):
        return fn(expr)
    if isinstance(expr, BinOp):
        return BinOp(expr.op, substitute(expr.left, fn), substitute(expr.right, fn))
    if isinstance(expr, Neg):
        return Neg(substitute(expr.operand, fn))
    return expr


def _div(a, b):
    if b == 0:
        raise EvaluationError(f"division by zero evaluating {a} / {b}")
    return a / b


_BIN = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": _div}


def compile_expr(expr: Expr, index: dict) -> Callable[[tuple], object]:
    """Turn ``expr`` into a function of a row; ``index`` maps refs (or their
    names) to tuple positions."""
    if isinstance(expr, (Column, Var)):
        pos = index[expr] if expr in index else index[expr.name]
        return lambda row: row[pos]
    if isinstance(expr, Literal):
        v = expr.value
        return lambda row: v
    if isinstance(expr, Neg):
        inner = compile_expr(expr.operand, index)

        def neg(row):
            v = inner(row)
            return None if v is None else -v
        return neg
    if isinstance(expr, BinOp):
        f = _BIN[expr.op]
        lhs = compile_expr(expr.left, index)
        rhs = compile_expr(expr.right, index)

        def binop(row):
            a = lhs(row)
            if a is None:
                return None
            b = rhs(row)
            if b is None:
                return None
            try:
                return f(a, b)
            except TypeError as exc:
                raise EvaluationError(str(exc)) from None
        return binop
    raise TypeError(f"not an expression: {expr!r}")


# -- local predicates -------------------------------------------------------

COMPARISON_OPS = ("=", "<>", "<", "<=", ">", ">=")
_FLIP = {"=": "=", "<>": "<>", "<": ">", "<=": ">=", ">": "<", ">=": "<="}
_CMP = {"=": operator.eq, "<>": operator.ne, "<": operator.lt,
        "<=": operator.le, ">": operator.gt, ">=": operator.ge}


def flip(op: str) -> str:
    return _FLIP[op]


@dataclass(frozen=True)
class Comparison:
    ref: Ref
    op: str
    value: object

    def __str__(self):
        return f"{self.ref} {self.op} {render_literal(self.value)}"


@dataclass(frozen=True)
class InList:
    ref: Ref
    values: tuple

    def __str__(self):
        return f"{self.ref} IN ({', '.join(render_literal(v) for v in self.values)})"


Predicate = Union[Comparison, InList]


def map_predicate(pred: Predicate, fn: Callable[[Ref], Ref]) -> Predicate:
    if isinstance(pred, Comparison):
        return Comparison(fn(pred.ref), pred.op, pred.value)
    return InList(fn(pred.ref), pred.values)


def compile_predicates(preds, index: dict) -> Callable[[tuple], bool]:
    """Conjunction of predicates under SQL semantics: NULL never qualifies."""
    checks = []
    for p in preds:
        pos = index[p.ref] if p.ref in index else index[p.ref.name]
        if isinstance(p, Comparison):
            if p.value is None:
                checks.append(lambda row: False)
                continue
            cmp, val = _CMP[p.op], p.value

            def check(row, pos=pos, cmp=cmp, val=val):
                v = row[pos]
                if v is None:
                    return False
                try:
                    return cmp(v, val)
                except TypeError as exc:
                    raise EvaluationError(str(exc)) from None
            checks.append(check)
        else:
            members = frozenset(v for v in p.values if v is not None)
            checks.append(lambda row, pos=pos, m=members: row[pos] is not None and row[pos] in m)
    if not checks:
        return lambda row: True
    return lambda row: all(c(row) for c in checks)
