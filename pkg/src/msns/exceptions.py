"""Exception hierarchy shared by the library and the command line harness."""


class MSNSError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MSNSError, ValueError):
    """Invalid run configuration."""


class DataError(MSNSError, ValueError):
    """Malformed or unusable dataset."""


class SolverError(MSNSError, RuntimeError):
    """A solver or an inner subproblem failed.

    ``k`` is the outer iteration at which the failure happened, when known.
    ``best_value`` carries the best objective found by an inner solver that
    ran out of budget.
    """

    def __init__(self, message, k=None, best_value=None):
        super().__init__(message)
        self.k = k
        self.best_value = best_value
