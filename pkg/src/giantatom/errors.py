"""Exception taxonomy for the scattering engine.

Every failure mode that a caller may want to catch programmatically gets its
own class.  All inherit from :class:`GiantAtomError` so blanket handling stays
possible at the CLI boundary.
"""


class GiantAtomError(Exception):
    """Base class for all engine errors."""


class PoleProximityError(GiantAtomError):
    """Dressed propagator evaluated too close to one of its poles."""


class PoleOutOfRangeError(GiantAtomError):
    """Principal-value pole too close to (or outside) the quadrature window."""


class GridTooCoarseError(GiantAtomError):
    """Grid refinement moved the solution more than the allowed tolerance."""


class SingularSystemError(GiantAtomError):
    """Discretized vertex system is numerically singular."""

    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class NoConvergenceError(GiantAtomError):
    """Iterative scheme failed to reach its residual target."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class TailMismatchError(GiantAtomError):
    """Supplied asymptotic tail disagrees with samples at the grid edge."""


class MissingF12Error(GiantAtomError):
    """Exact three-photon assembly requested without a two-photon vertex slice."""


class DegenerateNormalizationError(GiantAtomError):
    """Elastic single-photon amplitude too small to normalize a correlator."""


class ConservationViolationError(GiantAtomError):
    """Photon-flux balance between elastic and inelastic channels broken."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ExtrapolationUnstableError(GiantAtomError):
    """Finite-pulse-length results too far apart to extrapolate."""


class ConfigError(GiantAtomError):
    """Invalid or unknown configuration input."""
