"""Exception types raised across the package.

Everything derives from :class:`EpidcovError` so callers (the CLI in
particular) can tell input problems apart from internal failures.
"""


class EpidcovError(ValueError):
    """Base class for all input/validation errors."""


# metric3
class NegativeDistance(EpidcovError):
    pass


class TriangleViolation(EpidcovError):
    pass


class FullyDegenerate(EpidcovError):
    pass


# energy
class InvalidJoint(EpidcovError):
    pass


class EmptyTable(EpidcovError):
    pass


class SampleTooLarge(EpidcovError):
    pass


# permtest
class MarginMismatch(EpidcovError):
    pass


class DegenerateMargin(EpidcovError):
    """A margin puts all its mass on one genotype; the pair cannot be tested."""


# models
class MafOutOfRange(EpidcovError):
    pass


class NegativeCell(EpidcovError):
    """Model parameters fall outside the region where the table is a distribution."""


# scan / gwasio
class SnpListMismatch(EpidcovError):
    pass


class EmptyMatrix(EpidcovError):
    pass


class ParseError(EpidcovError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateSnpId(EpidcovError):
    pass


class InconsistentRowLength(ParseError):
    pass


class KTooLarge(EpidcovError):
    pass


class NoFlaggedPairs(EpidcovError):
    pass
