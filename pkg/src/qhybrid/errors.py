"""Exception hierarchy shared by every qhybrid module."""


class QHybridError(Exception):
    """Base class for all errors raised by qhybrid."""


class ConfigurationError(QHybridError, ValueError):
    """A configuration value is outside its allowed range."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ValidationError(QHybridError, ValueError):
    """An argument has the wrong shape, value or type."""


class QubitIndexError(QHybridError, IndexError):
    """A gate references a qubit the register does not have."""


class NumericError(QHybridError, ArithmeticError):
    """A computation produced a non-finite value."""


class ResourceError(QHybridError, MemoryError):
    """A request would need more memory than the component allows."""


class DataFormatError(QHybridError, ValueError):
    """Base class for malformed dataset or checkpoint files."""


class HeaderError(DataFormatError):
    pass


class NonNumericCellError(DataFormatError):
    def __init__(self, message, row, column):
        super().__init__(message)
        self.row = row
        self.column = column


class ColumnCountError(DataFormatError):
    def __init__(self, message, row):
        super().__init__(message)
        self.row = row


class LabelError(DataFormatError):
    def __init__(self, message, row):
        super().__init__(message)
        self.row = row


class BadMagicError(DataFormatError):
    pass


class UnsupportedVersionError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    def __init__(self, message, offset):
        super().__init__(message)
        self.offset = offset


class TrailingBytesError(DataFormatError):
    def __init__(self, message, offset):
        super().__init__(message)
        self.offset = offset
