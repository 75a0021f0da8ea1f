"""Exception hierarchy shared by the simulator modules."""


class PdnnError(Exception):
    pass


class DomainError(PdnnError, ValueError):
    """An argument lies outside the physical operating range of a device."""


class ValidationError(PdnnError, ValueError):
    """A structured value (plan, state, config) is malformed."""


class GeometryError(PdnnError, ValueError):
    pass


class CalibrationError(PdnnError):
    pass


class TrainingError(PdnnError):
    pass


class IncompleteFitError(PdnnError):
    def __init__(self, missing):
        self.missing = sorted(int(c) for c in missing)
        super().__init__(f"no samples seen for class(es) {self.missing}")


class ConfigError(PdnnError):
    """A run configuration is invalid or references a missing path."""


class StageError(PdnnError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
