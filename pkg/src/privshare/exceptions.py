"""Exception types shared across the package."""


class PrivshareError(Exception):
    """Base class for all package-specific errors."""


class InvalidGaussianError(PrivshareError, ValueError):
    """Covariance is not symmetric positive definite, or shapes are malformed."""


class DimensionMismatchError(PrivshareError, ValueError):
    """Operands have incompatible dimensions."""


class EmptySupportError(PrivshareError, ValueError):
    """A conditional was requested for a parameter value with zero posterior mass."""


class DegenerateUpdateError(PrivshareError, RuntimeError):
    """Every particle likelihood underflowed; the weight update is undefined.

    Carries the maximum per-particle log-likelihood so the caller can tell a
    policy/belief mismatch (very negative) from a genuine all-zero input.
    """

    def __init__(self, max_log_likelihood: float):
        self.max_log_likelihood = float(max_log_likelihood)
        super().__init__(
            "belief weight update degenerated: all particle likelihoods "
            f"underflowed (max log-likelihood {self.max_log_likelihood:.6g})"
        )


class PropagationError(PrivshareError, RuntimeError):
    """State transition produced a non-finite particle state."""

    def __init__(self, particle_indices):
        self.particle_indices = list(particle_indices)
        super().__init__(
            f"dynamics produced non-finite states for particles {self.particle_indices[:10]}"
            + ("..." if len(self.particle_indices) > 10 else "")
        )


class FeatureError(PrivshareError, RuntimeError):
    """Moment-generating-function feature evaluation overflowed or went non-finite."""


class ModelCorruptError(PrivshareError, RuntimeError):
    """Network parameters contain non-finite values."""


class GradientCheckError(PrivshareError, AssertionError):
    """Analytic gradients disagree with finite differences beyond tolerance."""

    def __init__(self, message: str, offenders=None):
        self.offenders = offenders or []
        super().__init__(message)


class ConfigError(PrivshareError, ValueError):
    """Configuration file failed validation; message names the offending field."""
