"""Exception and warning types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition.

    ``path`` names the offending configuration key when the error originates
    from a scenario document (for example ``"params.L"``).
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class IntegrationError(RuntimeError):
    """Raised when time stepping has to stop (non-finite values, constraint drift)."""


class CoincidentCentroidsWarning(RuntimeWarning):
    """Two centroids of different species coincide; the pair force was set to zero."""


class DegenerateShapeWarning(UserWarning):
    """A reference shape does not span the ambient space."""
