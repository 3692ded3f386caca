class CascadeError(ValueError):
    """Base class for errors raised by this package."""


class DimensionError(CascadeError):
    pass


class NotHermitianError(CascadeError):
    pass


class NotUnitaryError(CascadeError):
    pass


class StepIndexError(CascadeError):
    """A time-indexed operator family was queried outside its sampled range."""


class StabilityViolated(CascadeError):
    code = "STABILITY_VIOLATED"


class UnsupportedFrameError(CascadeError):
    """The continuous-limit interaction frame is ill-defined for this model."""


class ModelValidationError(CascadeError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = ", ".join(f"{v.code} ({v.residual:.3g})" for v in self.violations)
        super().__init__(f"invalid model: {lines}")
