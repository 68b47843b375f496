"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """An iterative numerical routine failed to converge or produced
    non-finite intermediate values."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but degenerate for the requested
    operation (e.g. a matrix whose diagonal vanishes after PSD clipping)."""


class ModelMismatchError(ValueError):
    """A ground-truth object does not satisfy the structural assumptions
    of the routine it was passed to (e.g. non-scalar noise where an
    isotropic model is required)."""


class InfeasibleSpecError(ValueError):
    """A synthetic-model specification cannot be realised exactly
    (e.g. requested factor structure forces diagonal entries above one)."""
