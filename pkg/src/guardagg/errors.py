"""Exception hierarchy shared by every stage of the engine."""


class EngineError(Exception):
    """Base class for all errors raised by guardagg."""


class IngestionError(EngineError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ConstraintError(EngineError):
    """Unknown relation/attribute in a constraint declaration."""


class ConstraintViolation(ConstraintError):
    """Declared unique key does not hold in the loaded data."""


class ParseError(EngineError):
    def __init__(self, message, position=None):
        self.position = position
        suffix = f" (at position {position})" if position is not None else ""
        super().__init__(message + suffix)


class ResolutionError(ParseError):
    """Attribute or relation reference that cannot be resolved."""


class NotSupported(ParseError):
    def __init__(self, feature, position=None):
        self.feature = feature
        super().__init__(f"not supported: {feature}", position)


class CyclicError(EngineError):
    """Raised when GYO reduction stalls; carries the irreducible edges."""

    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"query is cyclic; irreducible edges: {sorted(residual)}")


class PlanningError(EngineError):
    pass


class EvaluationError(EngineError):
    """Tuple-level failure while evaluating a scalar expression."""


class ArithmeticOverflow(EngineError):
    def __init__(self, operator, detail=""):
        self.operator = operator
        super().__init__(f"64-bit overflow in {operator}" + (f": {detail}" if detail else ""))


class BudgetExceeded(EngineError):
    def __init__(self, operator, rows, budget):
        self.operator = operator
        self.rows = rows
        self.budget = budget
        super().__init__(f"{operator} would materialise {rows} tuples (budget {budget})")
