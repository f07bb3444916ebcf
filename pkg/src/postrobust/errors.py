"""Exception hierarchy shared by all modules.

The CLI maps each class onto a process exit code, so new error kinds should
subclass one of these rather than raising bare ``ValueError``.
"""


class PostRobustError(Exception):
    """Base class for library errors."""


class InvalidInputError(PostRobustError, ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedDimensionError(InvalidInputError):
    """The requested method does not support this coefficient dimension."""


class PreconditionError(InvalidInputError):
    """A lemma instance fails one of its structural hypotheses."""

    def __init__(self, message, condition=None, witness=None):
        super().__init__(message)
        self.condition = condition
        self.witness = witness


class BudgetError(PostRobustError):
    """A combinatorial or search budget was exhausted."""


class NumericalError(PostRobustError):
    """A numerical routine produced a non-finite or unusable result."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location
