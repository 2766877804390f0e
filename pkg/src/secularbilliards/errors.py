"""Exception types raised across the package."""


class SecularBilliardsError(Exception):
    """Base class for all package errors."""


class SingularityError(SecularBilliardsError):
    """An evaluation came within the guard radius of a force center."""


class ChartDomainError(SecularBilliardsError):
    """A point lies outside the domain of the gnomonic chart."""


class RegionError(SecularBilliardsError):
    """A state lies outside the averaging region (non-elliptic, collisional,
    or on an orbit that meets an excluded center)."""


class QuadratureError(SecularBilliardsError):
    """Node doubling hit its cap before reaching the requested tolerance."""


class PeriodDetectionError(SecularBilliardsError):
    """The numerically integrated orbit did not close up within the budget."""


class KeplerConvergenceError(SecularBilliardsError):
    """Newton/bisection failed on Kepler's equation (should be unreachable)."""


class StepSizeUnderflow(SecularBilliardsError):
    """The adaptive integrator needed a step below the floor."""


class BilliardDegeneracy(SecularBilliardsError):
    """An impact hit a focus or an arc endpoint where no reflection is defined."""


class ScenarioError(SecularBilliardsError):
    """A scenario file failed to parse or validate."""
