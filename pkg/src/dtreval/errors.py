"""Exception hierarchy shared across the package.

Data problems (exit code 2 in the CLI) derive from DataError; numerical
failures (exit code 3) derive from NumericalError.
"""


class DtrError(Exception):
    pass


class DataError(DtrError):
    pass


class SchemaError(DataError):
    """Missing, duplicate or unparsable input columns."""


class OrderError(DataError):
    """Absorbing-state or monotone-treatment violation in a patient series."""


class GapError(DataError):
    """Non-contiguous or duplicated day indices for a patient."""


class RegimeEvalError(DataError):
    """A decision rule referenced a covariate that is not in the data."""


class ConfigError(DtrError):
    """Invalid run configuration (exit code 1 in the CLI)."""


class NumericalError(DtrError):
    pass


class SingularDesignError(NumericalError):
    """Rank-deficient weighted design with no ridge penalty to fall back on."""


class SeparationError(NumericalError):
    """Logistic likelihood is maximized at infinity (perfect separation)."""


class EmptyRiskSetError(NumericalError):
    """No eligible rows to fit or estimate from."""


class PositivityError(NumericalError):
    """A compatibility probability fell below the configured floor."""


class FoldError(NumericalError):
    """A cross-validation test fold had no usable mass for its selected regime."""
