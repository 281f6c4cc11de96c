"""Exception types shared across the package."""


class FieldAttrError(Exception):
    """Base class for all package errors."""


class DataError(FieldAttrError, ValueError):
    """Input data violates a documented precondition."""


class DegenerateWindowError(DataError):
    """A correlation window contains a zero-variance column."""

    def __init__(self, ticker, end_date):
        self.ticker = ticker
        self.end_date = end_date
        super().__init__(f"zero within-window variance for {ticker!r} in window ending {end_date}")


class FitError(FieldAttrError, RuntimeError):
    """Likelihood optimization failed or the input is degenerate."""


class ModelDomainError(FieldAttrError, ValueError):
    """Parameters fall outside the model's valid domain for the given data."""


class ConfigError(FieldAttrError, ValueError):
    """Protocol configuration is malformed."""
