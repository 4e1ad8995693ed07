"""Exception hierarchy shared by every module."""


class GCFormerError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(GCFormerError, ValueError):
    pass


class InvalidStateError(GCFormerError, RuntimeError):
    pass


class NumericError(GCFormerError, ArithmeticError):
    pass


class DataError(GCFormerError):
    """Raised for problems with input datasets."""


class DatasetNotFoundError(DataError, FileNotFoundError):
    pass


class MalformedRowError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class NonMonotoneTimestampError(DataError):
    pass


class CheckpointError(GCFormerError):
    """Unreadable or incompatible checkpoint; ``version`` echoes the header tag."""

    def __init__(self, message, version=None):
        super().__init__(message if version is None else f"{message} (version field: {version!r})")
        self.version = version


class ConfigError(GCFormerError, ValueError):
    pass
