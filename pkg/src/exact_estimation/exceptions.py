"""Exception hierarchy for exact_estimation."""


class ExactEstimationError(Exception):
    """Base class for all library errors."""


class MonotonicityViolated(ExactEstimationError, ValueError):
    """A candidate survival sequence increases somewhere."""


class ZeroSurvival(ExactEstimationError, ValueError):
    """A truncation law assigns zero survival to a realized index."""


class EmptyBudget(ExactEstimationError, RuntimeError):
    """No replicate completed within the computational budget."""


class Divergent(ExactEstimationError, ArithmeticError):
    """A series fails the ratio test at the supplied horizon."""


class HorizonExceeded(ExactEstimationError, RuntimeError):
    """A coupling did not occur before the hard step cap."""


class MissingResidual(ExactEstimationError, ValueError):
    """A split step needed the residual kernel but none was supplied."""


class DegeneratePair(ExactEstimationError, ValueError):
    """A state pair at zero distance was passed to a contraction check."""


class DomainError(ExactEstimationError, ValueError):
    """An argument lies outside the domain of a function."""


class SingularSystem(ExactEstimationError, ArithmeticError):
    """The stationary equations do not determine a unique solution."""


class ParseError(ExactEstimationError, ValueError):
    """A specification string could not be parsed."""

    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token
