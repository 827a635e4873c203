"""Exception hierarchy and CLI exit codes.

Every error category the CLI can surface maps to a distinct exit code so
that callers can branch on failures without parsing messages.
"""


class UntangleError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InvalidInput(UntangleError):
    exit_code = 10


class ShapeError(UntangleError):
    exit_code = 11


class MissingSoftLabel(UntangleError):
    exit_code = 12


class UnknownKind(UntangleError):
    exit_code = 13


class DegenerateTargets(UntangleError):
    exit_code = 14


class DegenerateDataset(UntangleError):
    exit_code = 15


class ConstantInput(UntangleError):
    exit_code = 16


class InvalidBaseline(UntangleError):
    exit_code = 17


class MissingClass(UntangleError):
    exit_code = 18


class SingularCovariance(UntangleError):
    exit_code = 19


class FileFormatError(UntangleError):
    exit_code = 20


class BadMagic(FileFormatError):
    exit_code = 21


class TruncatedPayload(FileFormatError):
    exit_code = 22


class FlagConflict(FileFormatError):
    exit_code = 23


class EmptyInput(UntangleError):
    exit_code = 24


class IdMismatch(UntangleError):
    exit_code = 25


class MissingInput(UntangleError):
    exit_code = 2
