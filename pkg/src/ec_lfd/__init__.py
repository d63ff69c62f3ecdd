"""One-shot learning of multi-stage contact-rich manipulation.

A single demonstration is segmented into motion phases, each phase is fitted
with an environmental-constraint model and disambiguated by simulated
exploratory probing, and the result is compiled into a hybrid automaton of
compliant primitives that track constraints online during execution and can
be refined with corrective demonstrations.
"""

from .se3 import Pose, Twist, Wrench, exp_map, log_map, spherical_to_dir
from .errors import (
    EcLfdError,
    ParseError,
    ValidationError,
    AngleNearPi,
    DegenerateGeometry,
    DegenerateDemo,
    DivergedFilter,
    AlignmentFailed,
    DimensionMismatch,
    UnknownScenario,
)

__all__ = [
    "Pose",
    "Twist",
    "Wrench",
    "exp_map",
    "log_map",
    "spherical_to_dir",
    "EcLfdError",
    "ParseError",
    "ValidationError",
    "AngleNearPi",
    "DegenerateGeometry",
    "DegenerateDemo",
    "DivergedFilter",
    "AlignmentFailed",
    "DimensionMismatch",
    "UnknownScenario",
]

__version__ = "0.1.0"
