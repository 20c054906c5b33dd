"""Exception hierarchy shared by all opfree modules."""


class OpfreeError(Exception):
    """Base class for all errors raised by opfree."""

    exit_code = 1


class SchemaError(OpfreeError):
    """Malformed problem input. ``path`` names the offending field."""

    exit_code = 2

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class DomainError(OpfreeError):
    """An argument lies outside the domain of the operation."""

    exit_code = 3


class SingularMapError(DomainError):
    """A linear map that must be inverted is singular."""


class DegreeError(DomainError):
    """A requested moment/cumulant degree exceeds what is stored."""


class ConstructionError(OpfreeError):
    """A constructed object failed its own validation."""

    exit_code = 3


class ConvergenceError(OpfreeError):
    """An iteration or series could not be certified."""

    exit_code = 4


class TruncationError(OpfreeError):
    """A free-product computation would exceed its truncation depth."""

    exit_code = 4
