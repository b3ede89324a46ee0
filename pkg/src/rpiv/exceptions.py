"""Exceptions raised by rpiv."""


class DataError(ValueError):
    """Input data cannot be used: malformed CSV, missing or duplicated
    columns, non-finite values, or samples too small to process."""


class EstimationError(ArithmeticError):
    """An estimator or test statistic is undefined for the given data:
    singular instrument Gram matrix, failed rank condition, or a test that
    requires overidentification applied to a just-identified model."""
