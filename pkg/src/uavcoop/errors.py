"""Exception hierarchy shared across the package."""


class UavCoopError(Exception):
    """Base class for all package errors."""


class ParameterError(UavCoopError, ValueError):
    """Simulation parameters violate an invariant."""


class PlacementError(UavCoopError):
    """UAV start positions could not be sampled with the required separation."""


class ScenarioParseError(UavCoopError):
    """A scenario file is malformed. ``location`` points at the offending spot."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class SingularityError(UavCoopError, ValueError):
    """Zero link distance, path loss undefined."""


class DomainError(UavCoopError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class LinearizationPointError(UavCoopError):
    """The point handed to the CCP linearization is unusable."""


class ValidationError(UavCoopError):
    """A cone program is malformed."""


class CapabilityError(UavCoopError):
    """The selected solver backend cannot handle a cone type."""


class AssignmentError(UavCoopError):
    """A user-to-UAV assignment cannot satisfy the capacity limits."""


class RankOneError(UavCoopError):
    """An SDP solution is not numerically rank one."""

    def __init__(self, ratio, tol):
        self.ratio = ratio
        self.tol = tol
        super().__init__(f"eigenvalue ratio {ratio:.3e} exceeds rank-1 tolerance {tol:.1e}")


class InitializationError(UavCoopError):
    """No feasible CCP starting point could be built."""

    def __init__(self, message, constraint=None):
        self.constraint = constraint
        super().__init__(message if constraint is None else f"{constraint}: {message}")


class TrajectoryError(UavCoopError):
    """A prescribed trajectory breaks the speed limit or the navigation region."""
