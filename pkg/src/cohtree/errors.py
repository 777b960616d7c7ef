"""Exception hierarchy. Each class carries the process exit code the CLI maps
it to: 2 usage, 3 data validation, 4 numerical degeneracy."""


class CohtreeError(Exception):
    exit_code = 1


class UsageError(CohtreeError):
    """Bad flags, unreadable config, missing referenced files."""

    exit_code = 2


class ValidationError(CohtreeError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class InsufficientDataError(ValidationError):
    """Series too short for the requested operation."""


class EmptyResultError(ValidationError):
    """An operation that must produce output produced none."""


class DegenerateInputError(CohtreeError):
    """Zero-variance or zero-power input; a halted or illiquid session."""

    exit_code = 4


class NumericalDegeneracyError(DegenerateInputError):
    """A denominator collapsed below representable range."""
