"""Exception hierarchy for shrinkerlab."""


class ShrinkerError(Exception):
    """Base class for all shrinkerlab errors."""


class DegenerateMetric(ShrinkerError):
    """The chart is not an immersion at an evaluated point."""


class GridTooCoarse(ShrinkerError):
    """Too few nodes along an axis for the requested stencil."""


class GridMismatch(ShrinkerError):
    """Fields sampled on incompatible grids."""


class InvalidSpec(ShrinkerError):
    """Malformed or inconsistent shrinker specification."""


class ResolutionTooLow(ShrinkerError):
    """Requested node counts below the supported minimum."""


class InvalidDimension(ShrinkerError):
    """Dimension outside the supported range."""


class NonpositiveRadius(ShrinkerError):
    """Profile trajectory reached r <= r_min."""


class NonpositiveScale(ShrinkerError):
    """Gaussian scale parameter t must be positive."""


class NoRoot(ShrinkerError):
    """Shooting bracket does not contain a sign change."""

    def __init__(self, message, bracket=None, values=None):
        super().__init__(message)
        self.bracket = bracket
        self.values = values


class NotLegendrian(ShrinkerError):
    """Chart fails the Legendrian verification."""


class NotClosed(ShrinkerError):
    """Profile curve is not closed."""


class SymmetryRequired(ShrinkerError):
    """Tangent field lacks the symmetry needed for a Lagrangian variation."""


class AllProjectionsZero(ShrinkerError):
    """All coordinate projections vanish; the chart is broken."""


class NotCritical(ShrinkerError):
    """Chart does not satisfy the self-shrinker equation to tolerance."""


class ZeroMeanCurvature(ShrinkerError):
    """A product factor has (numerically) vanishing mean curvature."""


class CaseNotCovered(ShrinkerError):
    """Inputs fall outside the hypotheses of the requested certificate."""


class CertificateFailed(ShrinkerError):
    """Certificate construction produced a non-negative quadratic form value."""


class VerificationError(ShrinkerError):
    """A built object failed its post-construction verification."""


class UnknownName(ShrinkerError):
    """Unknown catalog entry name."""
