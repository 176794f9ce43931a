"""Exception types shared across the innoscope package."""


class InnoscopeError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(InnoscopeError):
    """A row of the input stream could not be parsed."""

    def __init__(self, message, row_number=None):
        super().__init__(message)
        self.row_number = row_number


class SchemaError(InnoscopeError):
    """The input stream is missing a column required by the schema."""


class DataError(InnoscopeError):
    """A parsed value is missing, non-finite or out of its domain."""

    def __init__(self, message, row_number=None):
        super().__init__(message)
        self.row_number = row_number


class ClassificationError(InnoscopeError):
    """An EURIS label string does not match any known category."""


class DegenerateFeatureError(InnoscopeError):
    """A feature is constant where a spread is required (std or min/max fit)."""

    def __init__(self, message, feature=None):
        super().__init__(message)
        self.feature = feature


class InsufficientDataError(InnoscopeError):
    """Too few observations for the requested computation."""


class NumericError(InnoscopeError):
    """A numerical routine failed to produce a usable decomposition."""


class StratificationError(InnoscopeError):
    """A stratified split would leave a class empty in some partition."""


class BalanceError(InnoscopeError):
    """Resampling is impossible because only one class is present."""


class DivergenceError(InnoscopeError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class StageError(InnoscopeError):
    """A pipeline stage failed; wraps the causing error with the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
