"""Exception types shared across the package."""


class DecisionMapError(Exception):
    """Base class for all package errors."""


class ParameterError(DecisionMapError, ValueError):
    """A caller-supplied parameter is out of its documented range."""


class DimensionError(DecisionMapError, ValueError):
    """Array shapes do not match the contract (feature dim, vector length)."""


class DegenerateLabelsError(DecisionMapError, ValueError):
    """Training data contains fewer than two distinct labels."""


class UnsupportedError(DecisionMapError, RuntimeError):
    """Operation is not available for this classifier kind."""


class BackendError(DecisionMapError, RuntimeError):
    """External classifier backend failed or replied with a non-conforming payload."""

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class FitError(DecisionMapError, RuntimeError):
    """Nonlinear curve fit failed to converge."""


class DivergenceError(DecisionMapError, RuntimeError):
    """Iterative optimisation produced a non-finite loss."""


class DegenerateGeometryError(DecisionMapError, ValueError):
    """Point set is geometrically degenerate (e.g. all collinear)."""


class NeighborhoodExhaustedError(DecisionMapError, RuntimeError):
    """Neighbor composition ran out of distinct candidate indices."""
