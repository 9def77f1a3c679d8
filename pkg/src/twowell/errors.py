"""Exception types shared across the package."""


class TwoWellError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(TwoWellError, ValueError):
    """An argument is malformed, non-finite or outside its domain."""


class DomainError(InvalidInputError):
    """A scalar parameter lies outside the admissible range."""


class GridTooSmallError(InvalidInputError):
    """The grid has fewer nodes on some axis than the stencils need."""


class ResolutionError(InvalidInputError):
    """The grid does not resolve a feature; ``required`` holds the minimal cell count."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class GeometryError(InvalidInputError):
    """Transition zones overlap or leave the domain."""


class StructuralError(InvalidInputError):
    """A limiting-triple description does not tile the domain consistently."""


class StagnationError(TwoWellError, RuntimeError):
    """An iterative solver stopped making progress.

    ``iterate`` is the last accepted state and ``trace`` the energy history.
    """

    def __init__(self, message, iterate=None, trace=None):
        super().__init__(message)
        self.iterate = iterate
        self.trace = list(trace or [])


class StageError(TwoWellError):
    """A sweep stage failed; ``stage`` names it and ``eps`` the sweep point."""

    def __init__(self, stage, eps, cause):
        super().__init__(f"stage '{stage}' failed at eps={eps:g}: {cause}")
        self.stage = stage
        self.eps = eps
        self.cause = cause
