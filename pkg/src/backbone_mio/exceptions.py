"""Exception hierarchy shared by all solvers and estimators."""


class BackboneError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(BackboneError, ValueError):
    """Malformed data or hyperparameters."""


class UndefinedMetricError(BackboneError, ValueError):
    """A metric is not defined for the given inputs (e.g. a single class)."""


class SolverScaleError(BackboneError):
    """The instance is larger than an exact solver is configured to handle."""


class InfeasibleError(BackboneError):
    """The optimization problem has no feasible solution."""


class SolverError(BackboneError):
    """A subproblem or reduced-problem solver failed.

    ``iteration`` and ``subproblem`` locate the failure inside a backbone run
    when known.
    """

    def __init__(self, message, iteration=None, subproblem=None):
        super().__init__(message)
        self.iteration = iteration
        self.subproblem = subproblem
