"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """An input's shape does not match the object it is combined with."""


class CapacityLimitError(ValueError):
    """A dense-Hilbert-space operation was requested above the size cap."""


class NumericFailure(RuntimeError):
    """A computation produced non-finite values or a factorization failed.

    Carries optional diagnostics (offending configuration, minimum
    eigenvalue, iteration index) in ``details``.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class NonFiniteError(NumericFailure):
    """A value overflowed to inf/nan; the dynamics loop classifies this as
    divergence rather than an unrecoverable numeric failure."""


class DegenerateGradientError(NumericFailure):
    """The infidelity gradient is undefined (zero overlap); reseed the start."""


class ConfigError(ValueError):
    """An experiment config violates the schema; message names the path."""
