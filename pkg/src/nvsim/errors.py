"""Exception and warning types shared across the package."""


class NvsimError(Exception):
    """Base class for all package-specific errors."""


class NonHermitianInput(NvsimError):
    """A matrix that must be Hermitian failed the Hermiticity check."""


class StepSizeTooCoarse(NvsimError):
    """Integration step does not resolve the fastest Hamiltonian scale."""


class PropagationError(NvsimError):
    """Internal consistency failure during time propagation."""


class EngineMismatch(NvsimError):
    """Requested signal engine is invalid for the given drive regime."""


class FitFailure(NvsimError):
    """Nonlinear least squares did not converge.

    Carries the residual norm at the point where iteration stopped, when
    available, so callers can report diagnostics.
    """

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class InsufficientSpan(NvsimError):
    """Trace is too short to identify the requested model parameters."""


class NonUniformGrid(NvsimError):
    """Operation requires a uniformly sampled time grid."""


class DegenerateDesign(NvsimError):
    """Fit input has no variation along the independent variable."""


class ConfigError(NvsimError):
    """Run configuration failed validation."""


class RwaHierarchyWarning(UserWarning):
    """Drive parameters violate the frequency hierarchy the dressed-frame
    model relies on; analytic results may be inaccurate."""


class PerturbationWarning(UserWarning):
    """A fluctuation is large enough that perturbative expressions carrying
    it are only qualitative."""
