"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ValidationError -> 2,
FormatError and OSError -> 3, InvariantError -> 4.
"""


class ValidationError(ValueError):
    """Caller-supplied input violates a documented precondition."""


class FormatError(RuntimeError):
    """A file on disk is not a well-formed artifact of this package."""


class InvariantError(RuntimeError):
    """An internal postcondition failed; indicates a bug, not bad input."""
