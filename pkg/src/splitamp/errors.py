"""Exception hierarchy shared by all modules.

The CLI maps these classes onto exit codes, so new error types should
subclass the closest existing category.
"""


class SplitAmpError(Exception):
    """Base class for all package errors."""


class InputError(SplitAmpError, ValueError):
    """Malformed or inconsistent input data (files, arguments)."""


class FcidumpError(InputError):
    """An FCIDUMP file could not be parsed."""


class PreconditionError(SplitAmpError, ValueError):
    """A method was called outside its domain of applicability."""


class ReferenceDominanceError(PreconditionError):
    """The reference-determinant overlap is too small for cluster analysis."""


class ConvergenceError(SplitAmpError, RuntimeError):
    """An iterative solver failed to converge."""
