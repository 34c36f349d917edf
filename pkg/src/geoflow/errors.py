"""Exception types shared across the package."""


class GeoflowError(Exception):
    """Base class for all geoflow errors."""


class DegenerateMetricError(GeoflowError):
    """det(g) fell below the immersion floor: the grid map is no longer an immersion."""


class StepRejectedError(GeoflowError):
    """A time step produced non-finite positions."""


class GraphConditionError(GeoflowError):
    """The torus-map graph Jacobian became singular: the flow left the graph regime."""


class PastExtinctionError(GeoflowError):
    """A closed-form shrinking solution was queried at or past its extinction time."""


class DomainError(GeoflowError):
    """Argument outside the domain of a closed-form profile."""


class ProbeTimeError(GeoflowError):
    """Density probe time t0 must lie strictly after the evaluated snapshot time."""


class UnsupportedAmbientError(GeoflowError):
    """Operation defined for Euclidean ambient space only."""


class NotLagrangianError(GeoflowError):
    """Surface is not Lagrangian to tolerance; the check does not apply."""


class NonSymplecticJacobianError(GeoflowError):
    """Jacobian determinant deviates from 1 beyond tolerance."""


class NonpositiveEtaError(GeoflowError):
    """eta must be strictly positive for the weighted energy."""


class FitFailureError(GeoflowError):
    """Blow-up rate fit failed (nothing is blowing up, or the window is bad)."""


class ConfigError(GeoflowError):
    """Malformed experiment configuration."""


class CorruptTrackError(GeoflowError):
    """Track file failed magic/version/layout validation."""
