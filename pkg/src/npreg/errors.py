"""Exception types shared across the package."""


class NpregError(Exception):
    """Base class for all package-specific failures."""


class NumericError(NpregError):
    """A numerical routine failed to produce a trustworthy result."""


class DegenerateMatrixError(NumericError):
    """A structurally-required matrix is singular or too ill-conditioned to invert.

    Carries the condition estimate that triggered the rejection.
    """

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class DegenerateGeneratorError(DegenerateMatrixError):
    """The generator response matrix is singular for the given coefficients."""


class DegenerateSignalError(DegenerateMatrixError):
    """The signal Hankel matrix is singular; the coefficient solve is not well posed."""


class DegenerateSpectrumError(NumericError):
    """Eigenvalues are repeated (or too close) for a diagonalization-based routine."""


class SingularSystemError(NumericError):
    """The vectorized linear system has no unique solution (shared eigenvalues)."""


class DomainError(NpregError):
    """A plant right-hand side was evaluated outside its mathematical domain."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class BlowUpError(NpregError):
    """A simulated state exceeded the divergence guard.

    ``t_last`` is the last time at which the state was still finite and in bounds.
    """

    def __init__(self, message, t_last):
        super().__init__(message)
        self.t_last = t_last


class ConfigError(NpregError):
    """A scenario or CLI configuration is inconsistent or malformed."""


class PreconditionError(NpregError):
    """An oracle was invoked on inputs that violate its stated assumptions."""


class InconclusiveOracleError(NpregError):
    """A behavioral oracle could not reach a verdict (e.g. the run never converged)."""
