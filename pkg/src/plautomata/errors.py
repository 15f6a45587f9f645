"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary input validation; the classes here
distinguish resource-guard hits and numerical failures so the CLI can map them
to stable exit codes.
"""


class ResourceLimitError(RuntimeError):
    """An enumeration or size guard was exceeded."""


class NumericError(RuntimeError):
    """A numerical routine failed beyond its tolerance."""


class InfeasibleError(ValueError):
    """A requested graph object does not exist (e.g. unreachable root)."""
