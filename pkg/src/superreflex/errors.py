"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ``PreconditionError`` -> 1,
``CheckFailed`` -> 2, ``BudgetExhausted`` -> 3.
"""


class SuperreflexError(Exception):
    """Base class for library errors."""


class PreconditionError(SuperreflexError, ValueError):
    """An input violates the documented preconditions of an operation."""


class DimensionMismatch(PreconditionError):
    pass


class CheckFailed(SuperreflexError):
    """An internal consistency check failed (a computed bound or identity
    did not hold within tolerance)."""


class BudgetExhausted(SuperreflexError):
    """A search ran out of its evaluation budget before deciding."""
