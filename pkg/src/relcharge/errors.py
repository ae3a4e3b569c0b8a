"""Exception hierarchy shared by the library and the CLI."""


class RelchargeError(Exception):
    """Base class for every error raised by relcharge."""


class DomainError(RelchargeError, ValueError):
    """A point or state lies outside the domain where a quantity is defined."""


class QuadraturePoleError(DomainError):
    """The denominator of a quadrature integrand vanishes on the integration path."""


class NotASymmetryError(RelchargeError):
    pass


class PathDependenceError(RelchargeError):
    pass


class InsufficientSamplesError(RelchargeError):
    pass


class UnsupportedOperationError(RelchargeError):
    pass


class IntegrationError(RelchargeError):
    """Integration stopped early.

    ``last_time``/``last_phase`` hold the last accepted point and
    ``trajectory`` (when available) the samples collected up to it.
    """

    def __init__(self, message, last_time=None, last_phase=None, trajectory=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_phase = last_phase
        self.trajectory = trajectory


class StepUnderflowError(IntegrationError):
    pass


class DomainBoundaryError(IntegrationError):
    pass
