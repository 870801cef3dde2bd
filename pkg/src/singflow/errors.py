"""Exception types shared across the package."""


class SingflowError(Exception):
    """Base class for all package errors."""


class StepLimitExceeded(SingflowError):
    """The integrator ran out of its step budget."""


class LeftChart(SingflowError):
    """An orbit left the chart domain (or overflowed)."""


class AtSingularity(SingflowError):
    """An operation requiring a regular point was called too close to an equilibrium."""


class NoConvergence(SingflowError):
    """Newton iteration did not converge within its budget."""


class NotHyperbolic(SingflowError):
    """The Jacobian at an equilibrium has an eigenvalue too close to the imaginary axis."""


class DegenerateSpectrum(SingflowError):
    """Spectral rates unusable (e.g. log(lambda) <= 0)."""


class OutOfChart(SingflowError):
    """Point outside the linearity ball of a singularity profile."""


class NotOnSection(SingflowError):
    """Point not on the cross section within the defect tolerance."""


class TimeBudgetExceeded(SingflowError):
    """Exit-time search exceeded its budget (near-invariant-manifold point)."""


class BudgetExceeded(SingflowError):
    """Predicted partition size exceeds the configured cap."""


class CoverFailure(SingflowError):
    """Greedy flow-box cover exceeded its cell cap."""


class OverlapDetected(SingflowError):
    """An O(sigma) region overlaps a regular cell interior beyond tolerance."""


class NoHit(SingflowError):
    """Orbit failed to hit the target normal disk within its budget."""


class InsufficientData(SingflowError):
    """Not enough samples for the requested estimator."""


class ConfigError(SingflowError):
    """Invalid experiment configuration; message carries the offending field."""
