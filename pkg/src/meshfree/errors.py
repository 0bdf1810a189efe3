"""Exception types raised across the package."""


class MeshfreeError(Exception):
    """Base class for all package errors."""


class InvalidArgument(MeshfreeError, ValueError):
    pass


class DegenerateGeometry(MeshfreeError, ValueError):
    pass


class IllConditionedStencil(MeshfreeError, ArithmeticError):
    """Raised when a local moment matrix exceeds the configured condition limit."""

    def __init__(self, message, condition=None, center=None):
        super().__init__(message)
        self.condition = condition
        self.center = center


class SolveFailure(MeshfreeError, ArithmeticError):
    pass


class NumericalFailure(MeshfreeError, ArithmeticError):
    pass


class UnstableRun(NumericalFailure):
    pass


class IncompatibleCheckpoint(MeshfreeError, ValueError):
    pass
