"""Exception hierarchy shared by all modules."""


class StarkError(Exception):
    """Base class for library errors."""


class DomainError(StarkError, ValueError):
    """An argument lies outside the region where an operation is defined."""


class AccuracyError(StarkError):
    """A numerical procedure could not certify the requested accuracy.

    ``achieved`` carries the best error bound that was reached.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class IntegrationError(StarkError):
    """ODE integration failed; ``t_fail`` is the time at which it stopped."""

    def __init__(self, message, t_fail=None):
        super().__init__(message)
        self.t_fail = t_fail


class DivergenceError(StarkError):
    """An orbit did not escape within the allotted time budget."""


class ConstructionError(StarkError):
    """A constructive search (e.g. Borel cutoffs) exceeded its budget."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class ConfigError(StarkError, ValueError):
    """Invalid experiment configuration; ``fields`` lists offending keys."""

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)
