"""Exception hierarchy shared by every senti module."""


class SentiError(Exception):
    """Base class for all errors raised by senti."""


class ShapeError(SentiError):
    """Raised when tensor or raster dimensions do not line up."""


class ContractError(SentiError):
    """Raised when a caller breaks an operation's precondition."""


class DegenerateMaskError(ContractError):
    """Raised when a mask carries no weight where weight is required."""


class NumericError(SentiError):
    """Raised when a NaN or Inf would escape a tensor operation."""


class ConfigError(SentiError):
    """Raised for unknown or malformed configuration keys."""


class FormatError(SentiError):
    """Raised when a file does not follow its documented format."""


class BadMagicError(FormatError):
    """Raised when a binary file starts with foreign magic bytes."""


class CorruptFileError(FormatError):
    """Raised when a file is truncated or fails its checksum."""


class VersionMismatchError(FormatError):
    """Raised when a file was written by an unsupported format version."""


class TransferError(SentiError):
    """Raised when one or more transfer jobs fail.

    `failures` holds (job index, exception) pairs in request order.
    """

    def __init__(self, failures: list[tuple[int, Exception]]):
        self.failures = failures
        detail = "; ".join(f"job {index}: {error}" for index, error in failures)
        super().__init__(f"{len(failures)} transfer job(s) failed ({detail})")
