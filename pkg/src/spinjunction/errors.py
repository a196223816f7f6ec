"""Exception and warning types shared across the package."""


class ValidationError(ValueError):
    """Invalid input parameters; the CLI maps this to exit code 2."""

    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = list(fields or [])


class NumericalError(RuntimeError):
    """A numerical procedure failed; the CLI maps this to exit code 3."""


class DegenerateSteadyStateError(NumericalError):
    def __init__(self, message, basis):
        super().__init__(message)
        self.basis = basis


class NearSingularWarning(RuntimeWarning):
    """A decay rate was evaluated close to the band-edge singularity."""


class PositivityWarning(RuntimeWarning):
    """A density matrix acquired eigenvalues below the tolerated threshold."""


class HorizonWarning(RuntimeWarning):
    """A truncated time integral may not have converged."""
