"""Exception hierarchy shared by all solver modules."""


class DeltaProcError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(DeltaProcError, ValueError):
    """State/control/matrix dimensions are inconsistent."""


class DivergenceError(DeltaProcError):
    """Integration blew up (non-finite or above the magnitude cap).

    ``last_valid_time`` holds the last time at which the state was finite.
    """

    def __init__(self, message, last_valid_time):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class SingularFitError(DeltaProcError, ValueError):
    """The fitting system is singular or unidentifiable."""


class CoverageError(DeltaProcError, ValueError):
    """Trajectory data does not cover the requested time partition."""

    def __init__(self, message, uncovered_knots=()):
        super().__init__(message)
        self.uncovered_knots = list(uncovered_knots)


class TrajectoryParseError(DeltaProcError, ValueError):
    """Malformed trajectory file; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class TrivialCostateError(DeltaProcError, ValueError):
    """A zero initial costate was supplied; the adjoint must be nontrivial."""


class InfeasibleTransferError(DeltaProcError):
    """No admissible vertex control moves the state to the target."""


class ShootingError(DeltaProcError):
    """Costate shooting did not reach the target within tolerance.

    ``best_residual`` is the smallest terminal miss distance found.
    """

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class RescalingDomainError(DeltaProcError, ValueError):
    """Cost integrand was non-positive where a monotone time map is needed."""


class GenerationError(DeltaProcError):
    """A reference trajectory could not reach a requested checkpoint."""


class InfeasibilityReport(DeltaProcError):
    """Brute-force search never reached the goal on any grid point."""
