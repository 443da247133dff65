"""Exception hierarchy."""


class EitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EitError, ValueError):
    """Invalid user-supplied parameters (electrode count, tags, config keys)."""


class DomainError(EitError, ValueError):
    """A physical parameter outside its admissible range."""


class GeometryError(EitError, ValueError):
    """Degenerate triangle or edge."""


class StructuralError(EitError):
    """Broken mesh invariant or unrelated meshes."""


class NumericalError(EitError, ArithmeticError):
    """Linear solve failed, or an iteration did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedModelError(EitError):
    """Operation not defined for the requested electrode model."""
