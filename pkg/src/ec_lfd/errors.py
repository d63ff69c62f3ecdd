"""Exception types shared across the package."""


class EcLfdError(Exception):
    """Base class for all package-specific errors."""


class ParseError(EcLfdError):
    """A file or stream could not be decoded into the expected record shape."""


class ValidationError(EcLfdError):
    """Decoded data violates a documented precondition or invariant."""


class AngleNearPi(EcLfdError):
    """Rotation angle is too close to pi for a well-conditioned logarithm."""


class DegenerateGeometry(EcLfdError):
    """Input geometry does not determine the requested model (coincident
    points, insufficient angular span, collinear circle data)."""


class DegenerateDemo(EcLfdError):
    """A demonstration is too short or too still to segment."""


class DivergedFilter(EcLfdError):
    """A tracker's innovation system became numerically singular."""


class AlignmentFailed(EcLfdError):
    """Feature alignment could not be established (too few matches or no
    reference cloud visible)."""


class DimensionMismatch(EcLfdError):
    """Array arguments have inconsistent shapes."""


class UnknownScenario(EcLfdError):
    """Requested scenario name is not one of the built-in generators."""


class InsufficientMatches(EcLfdError):
    """Fewer than three mutual feature matches between two clouds."""


class NoFramesInPhase(EcLfdError):
    """A free-space phase recorded no feature frames to servo against."""


class UnlabeledPhase(EcLfdError):
    """A phase reached the policy builder without a terminal event."""


class KindMismatch(EcLfdError):
    """A correction's primitive kind is incompatible with its target node."""


class EmptyCloud(EcLfdError):
    """Stability filtering removed every feature of a reference cloud."""


class DegenerateDirection(EcLfdError):
    """A probe direction formula produced a near-zero vector."""
