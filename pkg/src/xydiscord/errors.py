"""Exception types raised across the package."""


class XYDiscordError(Exception):
    """Base class for all package errors."""


class ValidationError(XYDiscordError, ValueError):
    """Invalid user-supplied parameters."""


class NumericalError(XYDiscordError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class QuadratureNoConvergence(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SectorMismatch(NumericalError):
    """Two fields sit on opposite sides of a parity-sector crossing."""


class DimensionTooLarge(ValidationError):
    pass


class BlochViolation(ValidationError):
    pass


class NotPositive(NumericalError):
    """Reduced density matrix has a significantly negative eigenvalue."""


class NoPeak(NumericalError):
    pass


class ReferenceMissing(ValidationError):
    pass


class InsufficientRange(ValidationError):
    pass


class SamplerFailure(NumericalError):
    pass
