"""Exception hierarchy shared by all modules."""


class LandisError(Exception):
    """Base class for every error raised by this package."""


class NegativeInput(LandisError, ValueError):
    pass


class NonPositiveAlpha(LandisError, ValueError):
    pass


class UnknownProfile(LandisError, KeyError):
    pass


class ParameterOutOfRange(LandisError, ValueError):
    pass


class BoundViolation(LandisError, ValueError):
    """Sampled coefficient values exceed the declared (certified) bounds."""


class EmptyTail(LandisError, ValueError):
    pass


class WindowExceeded(LandisError, ValueError):
    pass


class IntegratorFailure(LandisError, RuntimeError):
    pass


class KappaPrimeNotGreater(LandisError, ValueError):
    pass


class KappaZero(LandisError, ValueError):
    pass


class PreconditionNotSteep(LandisError, ValueError):
    pass


class NoBounceInWindow(LandisError, RuntimeError):
    """No bounce was found inside the integration window.

    This is a falsification *candidate* only: the bounce may lie beyond the
    truncated window.
    """


class ResidualTooLarge(LandisError, ValueError):
    pass


class NotNormalizable(LandisError, ValueError):
    pass


class ConvergenceFailure(LandisError, RuntimeError):
    pass


class NotPositive(LandisError, ValueError):
    pass


class QuadratureTooCoarse(LandisError, ValueError):
    pass


class WindowContainsOrigin(LandisError, ValueError):
    pass


class DomainError(LandisError, ValueError):
    pass


class KappaBelowThreshold(LandisError, ValueError):
    pass


class GridTooCoarse(LandisError, RuntimeError):
    pass


class NormalizationCollarEmpty(LandisError, ValueError):
    pass


class ConfigParse(LandisError, ValueError):
    pass


class InvariantViolated(UserWarning):
    """Warning: a parameter invariant is violated but evaluation proceeds."""
