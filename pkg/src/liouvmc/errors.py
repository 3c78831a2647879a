"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, numerical failures
(everything deriving from NumericalError) -> 3.
"""


class DomainError(ValueError):
    """Invalid domain input: bad site value, dimension mismatch, bad partition."""


class SizeLimitError(ValueError):
    """System size exceeds what a dense construction can safely handle."""


class ConfigError(ValueError):
    """Run configuration is malformed; message carries key/line context."""


class NumericalError(RuntimeError):
    """Base class for failures of the numerical machinery."""


class DegenerateSteadyStateError(NumericalError):
    """More than one Liouvillian eigenvalue indistinguishable from zero."""


class DegenerateVarianceError(NumericalError):
    """A variance-based diagnostic received constant data."""


class SolverFailureError(NumericalError):
    """Linear solve produced non-finite values or an unacceptable residual."""


class SampleUnderflowError(NumericalError):
    """Amplitude of a sampled configuration too small for stable ratios."""
