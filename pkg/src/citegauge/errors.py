"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1, data
problems exit 2, anything else exits 3.
"""


class CiteGaugeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CiteGaugeError):
    """A parameter or option combination that can never work."""


class DataError(CiteGaugeError):
    """Input data is missing, malformed, or internally inconsistent."""


class TrainingError(DataError):
    """Training data cannot produce a valid model (single class, NaN, ...)."""


class EvaluationError(DataError):
    """A metric is undefined for the supplied inputs (no positives, zero variance)."""
