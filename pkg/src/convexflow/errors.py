"""Exception hierarchy shared by all convexflow modules."""


class ConvexFlowError(Exception):
    """Base class for every error raised by the package."""


class NonConvexBody(ConvexFlowError):
    pass


class OriginNotInterior(ConvexFlowError):
    pass


class GridMismatch(ConvexFlowError):
    pass


class SingularMatrix(ConvexFlowError):
    pass


class DegenerateBody(ConvexFlowError):
    pass


class NotConverged(ConvexFlowError):
    pass


class InteriorLost(ConvexFlowError):
    pass


class MeasureNotCentered(ConvexFlowError):
    pass


class DimensionUnsupported(ConvexFlowError):
    pass


class SymmetryViolation(ConvexFlowError):
    pass


class StepCollapse(ConvexFlowError):
    """Raised when the time step cannot keep the body strictly convex.

    Usually this means the flow is approaching its maximal time and the
    grid can no longer resolve the blow-up.
    """


class RejectionExhausted(ConvexFlowError):
    pass


class UsageError(ConvexFlowError):
    """Invalid user supplied configuration (CLI exit status 2)."""
