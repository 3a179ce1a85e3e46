"""Exception and warning types shared across the package."""


class ValidationError(ValueError):
    """Raised when user-supplied data or configuration is malformed."""


class ConvergenceWarning(UserWarning):
    """Emitted when sampler diagnostics indicate the chains may not have mixed."""


class SamplingError(RuntimeError):
    """Raised when an MCMC run cannot proceed (bad initialization, no usable step size)."""
