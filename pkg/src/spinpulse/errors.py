"""Exception types that separate contract violations from numerical failures."""


class ShapeError(ValueError):
    """Operands have incompatible shapes or a non-square matrix was required."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of the operation."""


class ValidationError(ValueError):
    """A value violates its declared invariants (normalization, diagonality, ...)."""


class CapacityError(ValueError):
    """A requested allocation exceeds the dense-storage caps."""


class ConvergenceError(RuntimeError):
    """An iterative routine failed to reach tolerance.

    The ``achieved`` attribute carries the error estimate at the point of
    failure when one is available, else ``None``.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
