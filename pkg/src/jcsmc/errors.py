"""Exception types shared across the package."""


class JcsmcError(Exception):
    """Base class for all package errors."""


class InvalidArgument(JcsmcError, ValueError):
    pass


class ConfigError(InvalidArgument):
    pass


class NumericalFailure(JcsmcError, ArithmeticError):
    pass


class DegenerateSensing(JcsmcError):
    """The target response ``H_s p`` vanishes, so no receiver can sense."""


class DegeneratePattern(JcsmcError):
    pass


class InfeasibleSensing(JcsmcError):
    """No strictly feasible start satisfies the sensing SINR floor.

    ``achieved`` holds the linear SINR reached by the initial beamformer.
    """

    def __init__(self, message, achieved=None, required=None):
        super().__init__(message)
        self.achieved = achieved
        self.required = required


class NeedsPhaseOne(JcsmcError):
    """The supplied solver start point is not strictly feasible."""

    def __init__(self, message, max_violation=None):
        super().__init__(message)
        self.max_violation = max_violation


class ConvergenceFailure(JcsmcError):
    """Iteration cap reached; ``best`` carries the last usable iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ProblemTooLarge(InvalidArgument):
    pass
