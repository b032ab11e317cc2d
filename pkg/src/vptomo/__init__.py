"""Beam-probe tomography of a doping profile on the unit disk.

Forward model: thin charged beams shot along chords of the disk, traced
through the self-consistent electrostatic field; the exit-velocity shift
of each beam measures the line integral of the doping-generated field.
Inverse step: filtered back-projection of those line integrals plus a
divergence recovers the doping profile.
"""

__version__ = "0.1.0"

from .errors import (AcquisitionError, BeamDefinitionError, ConfigError,
                     DegenerateExitError, NoAnalyticReferenceError,
                     NoIntersectionError, NonContractionError,
                     NotOnBoundaryError, OutsideGridError, TrappedBeamError,
                     VptomoError)

__all__ = [
    "__version__",
    "VptomoError", "ConfigError", "NoIntersectionError", "NotOnBoundaryError",
    "OutsideGridError", "BeamDefinitionError", "NonContractionError",
    "DegenerateExitError", "NoAnalyticReferenceError", "AcquisitionError",
    "TrappedBeamError",
]
