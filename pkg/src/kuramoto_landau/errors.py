"""Exception and warning types shared across the package."""


class KuramotoError(Exception):
    """Base class for all package errors."""


class ConfigurationError(KuramotoError, ValueError):
    """Invalid grid, step size or configuration value."""


class NumericalError(KuramotoError, RuntimeError):
    """A quadrature or iteration failed to converge."""


class NoPartiallyLockedState(KuramotoError):
    """The self-consistency map has no nonzero fixed point for this (K, g)."""


class DegenerateRotationProjection(KuramotoError):
    """alpha of the rotation mode is numerically zero."""


class StepTooLarge(KuramotoError):
    """The implicit diagonal block of a Volterra step is singular."""


class ContourTooClose(KuramotoError):
    """The root-search contour passes too close to a root."""


class InconsistentKTheta(KuramotoError):
    """Tail-average and null-vector estimates of K_Theta disagree."""

    def __init__(self, message, tail_estimate=None, null_estimate=None):
        super().__init__(message)
        self.tail_estimate = tail_estimate
        self.null_estimate = null_estimate


class ProjectionFailed(KuramotoError):
    """No angle in the search bracket zeroes alpha of the perturbation."""


class PolarCoordinatesBreakdown(KuramotoError):
    """The denominator of theta_dot fell below half of alpha(D R f_stat)."""


class Diverged(KuramotoError):
    """The perturbation norm grew beyond the configured blow-up factor."""


class TruncationWarning(UserWarning):
    """A truncated time integral has a non-negligible estimated tail."""
