"""Exception hierarchy shared by all planner modules."""


class CastrError(Exception):
    """Base class for every error raised by this package."""


class InvalidGeometry(CastrError, ValueError):
    pass


class DegenerateGeometry(InvalidGeometry):
    pass


class InvalidRotation(CastrError, ValueError):
    pass


class InvalidKinematics(CastrError, ValueError):
    pass


class NumericalFailure(CastrError, ArithmeticError):
    pass


class EmptyActionSet(CastrError, ValueError):
    pass


class PlanFailure(CastrError):
    """A search ended without a plan. ``stats`` describes the work done."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class NoPlanExists(PlanFailure):
    pass


class TimedOut(PlanFailure):
    pass


class Infeasible(CastrError):
    pass


class MaxIterations(CastrError):
    pass


class ParseError(CastrError, ValueError):
    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.field = field
        self.line = line


class ValidationError(CastrError, ValueError):
    def __init__(self, message, invariant=None):
        if invariant is not None:
            message = f"[{invariant}] {message}"
        super().__init__(message)
        self.invariant = invariant
