"""Exception hierarchy shared by all modules."""


class LemniscateError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(LemniscateError):
    """Input violates a documented precondition."""


class MalformedDocument(ValidationError):
    pass


class CurvesIntersect(ValidationError):
    pass


class PoleInWhiteFace(ValidationError):
    pass


class GreyFaceWithoutPole(ValidationError):
    pass


class OnBoundary(ValidationError):
    pass


class PoleOutsideFace(ValidationError):
    pass


class ConvergenceError(LemniscateError):
    """A numerical procedure did not reach its tolerance."""


class SolverSingular(ConvergenceError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ResolutionTooLow(ConvergenceError):
    pass


class LevelOutOfRange(ValidationError):
    pass


class GradientTooSmall(ConvergenceError):
    pass


class FailedToClose(ConvergenceError):
    pass


class EmptySet(ValidationError):
    pass


class SeparationFailed(ConvergenceError):
    pass


class FunctionNotAnalyticOnContour(ValidationError):
    pass


class PointOutsideContour(ValidationError):
    pass


class QuadratureNotConverged(ConvergenceError):
    pass


class NoConvergence(ConvergenceError):
    pass
