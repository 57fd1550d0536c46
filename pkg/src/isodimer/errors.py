"""Exception types shared across the package."""


class IsodimerError(Exception):
    """Base class for all errors raised by this package."""


class NonIsoradialError(IsodimerError):
    """A face fails the unit-circumradius or circumcenter-in-face check."""


class DegenerateRhombusError(IsodimerError):
    """A rhombus half-angle falls outside (epsilon, pi/2 - epsilon)."""


class OutOfRangeError(IsodimerError):
    """A scalar argument is outside its admissible interval."""


class NoPathError(IsodimerError):
    """Two vertices are not connected."""


class VertexOnTrackError(IsodimerError):
    """Separation query ambiguous: vertex interior to the track strip."""


class PoleHitError(IsodimerError):
    """Evaluation point coincides with a pole."""


class OrientationFailureError(IsodimerError):
    """No Kasteleyn orientation satisfies the face parity constraints."""


class InconsistentAnglesError(IsodimerError):
    """Angle propagation failed to close mod 4*pi."""


class BoundaryTooCloseError(IsodimerError):
    """Vertex violates the interior-margin requirement of a local formula."""


class EmptySectorError(IsodimerError):
    """No pole-free angular sector exists (gamma-path construction bug)."""


class PoleCollisionError(IsodimerError):
    """Coincident poles outside the tabulated exceptional cases."""


class NonConvergenceError(IsodimerError):
    """A numerical oracle failed to reach its accuracy budget."""


class OddOrderError(IsodimerError):
    """Pfaffian of an odd-dimensional matrix requested."""


class NotAMatchingFragmentError(IsodimerError):
    """Cylinder query edges are not vertex-disjoint."""


class OutOfRangeProbabilityError(IsodimerError):
    """A probability left [0, 1] beyond tolerance — convention bug."""


class TooLargeError(IsodimerError):
    """Brute-force enumeration budget exceeded."""


class NoPerfectMatchingError(IsodimerError):
    """The graph admits no perfect matching."""


class RatioNotConstantError(IsodimerError):
    """Sampled characteristic-polynomial ratios deviate from a constant."""


class ConfigError(IsodimerError):
    """Invalid CLI configuration."""
