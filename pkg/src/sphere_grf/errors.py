"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedDimensionError(DomainError):
    pass


class QuadratureError(RuntimeError):
    pass


class DivergenceError(ValueError):
    """A spectrum (or transformed spectrum) has infinite total mass."""


class TruncationError(RuntimeError):
    """The requested tolerance cannot be certified within the term budget.

    ``achieved_bound`` is the best certified remainder at the budget and
    ``required_terms`` an estimate of the number of terms needed (``None``
    when no finite estimate exists).
    """

    def __init__(self, message, achieved_bound=None, required_terms=None):
        super().__init__(message)
        self.achieved_bound = achieved_bound
        self.required_terms = required_terms


class NotPSDError(RuntimeError):
    """Cholesky factorization failed even at the maximum jitter."""


class ConfigError(ValueError):
    """A model document or run configuration is malformed."""
