"""Exception hierarchy.

Input problems (bad files, bad operators, unknown records) derive from
``InputError``; failures of the numerics themselves derive from
``NumericalError``. The CLI maps the two families to distinct exit codes.
"""


class GeoError(Exception):
    pass


class InputError(GeoError, ValueError):
    pass


class NumericalError(GeoError, RuntimeError):
    pass


class NotHermitianError(InputError):
    pass


class NotTracelessError(InputError):
    pass


class NotUnitaryError(InputError):
    pass


class DimensionError(InputError):
    pass


class CircuitError(InputError):
    """Invalid circuit description. ``position`` locates the offending item."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)


class CircuitSyntaxError(CircuitError):
    pass


class UnknownGateError(CircuitError):
    pass


class ArityError(CircuitError):
    pass


class QubitRangeError(CircuitError):
    pass


class CheckpointError(InputError):
    pass


class LogarithmError(NumericalError):
    """The eigendecomposition of a unitary failed to reproduce it."""


class UnitarityDriftError(NumericalError):
    pass


class SpeedConservationError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class IllConditionedError(NumericalError):
    """Jacobi propagator too close to singular (likely a conjugate point)."""


class ProjectionResidueError(NumericalError):
    pass


class BoundaryAbortError(NumericalError):
    pass
