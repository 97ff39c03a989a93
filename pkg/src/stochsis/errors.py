"""Exception hierarchy shared by all modules."""


class StochSISError(Exception):
    """Base class for errors raised by stochsis."""


class ParameterDomainError(StochSISError, ValueError):
    """A model or incidence parameter violates its positivity/domain constraint."""


class DomainError(StochSISError, ValueError):
    """A state argument lies outside the interval an operation is defined on."""


class RegimeError(StochSISError):
    """The parameters do not satisfy the hypotheses an operation requires."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class DegenerateError(RegimeError):
    """The noise intensity is zero where a positive value is required."""


class ShapeViolationError(RegimeError):
    """The drift of ln x does not have the unimodal shape the persistence theory predicts."""


class NumericalError(StochSISError):
    """Base class for integration failures."""


class InstabilityError(NumericalError):
    """A deterministic step left (0, N); a smaller dt is needed."""


class BlowupError(NumericalError):
    def __init__(self, message, step=None, trajectory=None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


class ConfigError(StochSISError, ValueError):
    """Invalid run or ensemble configuration."""


class CensoringWarning(UserWarning):
    pass


class RegimeWarning(UserWarning):
    pass
