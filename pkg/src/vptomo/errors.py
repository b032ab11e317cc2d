"""Exception types shared across the pipeline.

Every error carries a short machine-readable code that the CLI prints
before exiting, so scripted callers can branch on failures without
parsing prose.
"""


class VptomoError(Exception):
    code = "error"

    def __init__(self, message=""):
        super().__init__(message or self.code)


class ConfigError(VptomoError):
    code = "config"


class NoIntersectionError(VptomoError):
    code = "no-intersection"


class NotOnBoundaryError(VptomoError):
    code = "not-on-boundary"


class OutsideGridError(VptomoError):
    code = "outside-grid"


class BeamDefinitionError(VptomoError):
    code = "beam-invalid"


class NonContractionError(VptomoError):
    code = "non-contraction"

    def __init__(self, speed, ratios):
        self.speed = speed
        self.ratios = ratios
        super().__init__(f"non-contraction at speed {speed}: ratios {ratios}")


class DegenerateExitError(VptomoError):
    code = "degenerate-exit"


class NoAnalyticReferenceError(VptomoError):
    code = "no-analytic-reference"


class AcquisitionError(VptomoError):
    code = "acquisition-failed"


class TrappedBeamError(VptomoError):
    code = "trapped"
