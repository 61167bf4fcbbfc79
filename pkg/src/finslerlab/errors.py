"""Exception hierarchy shared by every module."""


class FinslerLabError(Exception):
    """Base class for all errors raised by finslerlab."""


class UsageError(FinslerLabError, ValueError):
    """Invalid arguments: bad order, index, shape, or insufficient jet depth."""


class DomainError(FinslerLabError, ValueError):
    """A square root or similar operation was asked to leave its domain."""


class SingularityError(FinslerLabError, ZeroDivisionError):
    """Division by a quantity whose value is zero."""


class DegenerateMetricError(FinslerLabError):
    """The metric fails positivity or strong convexity at some point."""


class PreconditionError(FinslerLabError):
    """A check was requested whose mathematical precondition does not hold."""
