"""Exception types shared across the package.

The CLI maps ``ConfigError`` (and argparse usage problems) to exit code 1
and ``DomainError`` subclasses (numeric/domain failures) to exit code 2.
"""


class HfsvError(Exception):
    """Base class for all package errors."""


class ConfigError(HfsvError):
    """Malformed configuration, missing keys, or bad CLI usage."""


class DomainError(HfsvError):
    """A value violates a mathematical precondition or invariant."""


class GridError(DomainError):
    """Sampling grids that do not nest or align."""


class ElicitationError(DomainError):
    """Prior moment matching has no admissible solution."""


class FilterError(DomainError):
    """Numerical failure inside the state-space filter or sampler."""


class IngestError(DomainError):
    """Tick file cannot be mapped onto the requested observation grid."""
