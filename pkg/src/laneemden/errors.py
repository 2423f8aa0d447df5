"""Exception hierarchy shared by all modules."""


class LaneEmdenError(Exception):
    """Base class for every error raised by the package."""


class DomainError(LaneEmdenError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(LaneEmdenError, ValueError):
    """Grid sizes, tolerances or other settings are unusable."""


class ShapeError(LaneEmdenError, ValueError):
    """A coefficient table does not match the requested harmonic."""


class DegenerateProfileError(LaneEmdenError, ValueError):
    """The profile is identically zero within tolerance."""


class NumericalError(LaneEmdenError, RuntimeError):
    """A numerical kernel (integrator, eigensolver, linear solve) failed.

    ``where`` carries the location of the failure when one is known, e.g. the
    radius at which the integrator stalled or the exponent ``p`` of a failing
    solve.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class SearchFailure(NumericalError):
    """No shooting bracket was found in the configured search range."""

    def __init__(self, message, search_range=None, last_counts=None):
        super().__init__(message)
        self.search_range = search_range
        self.last_counts = last_counts


class ConvergenceError(NumericalError):
    """An iteration did not reach its tolerance within the iteration cap."""


class NotFoundError(LaneEmdenError, LookupError):
    """No crossing of the requested kind exists in the sampled range."""

    def __init__(self, message, samples=None):
        super().__init__(message)
        self.samples = samples


class ResolutionError(NumericalError):
    """A crossing is too close to call at the requested offset; shrink it."""


class AtDegeneracyError(NumericalError):
    """The requested quantity is undefined at a degenerate exponent."""


class InconsistencyError(NumericalError):
    """Computed quantities contradict a proven structural property."""


class StepFailure(NumericalError):
    """A Newton correction diverged or stalled."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual
