"""Exception hierarchy shared by the simulator, the CLI and the HTTP service."""


class QsqedError(Exception):
    """Root of all QSQED errors."""


class ValidationError(QsqedError, ValueError):
    """Input rejected: bad index, shape, non-unitary matrix, bad probabilities..."""


class DimensionCapError(ValidationError):
    """Register or operator larger than the configured dimension cap."""

    def __init__(self, dim: int, cap: int):
        super().__init__(f"total dimension {dim} exceeds cap {cap} (set QSQED_DIM_CAP to override)")
        self.dim = dim
        self.cap = cap


class UnsupportedError(QsqedError, NotImplementedError):
    """Requested combination (native gate set, n_max, ...) is not implemented."""


class DecompositionError(QsqedError):
    """A decomposition or numerical fit failed verification."""

    def __init__(self, name: str, residual: float, detail: str = ""):
        msg = f"{name}: residual {residual:.3e}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)
        self.name = name
        self.residual = residual


class EigensolveError(QsqedError):
    """Eigendecomposition did not converge."""
