"""Exception hierarchy shared by all modules."""


class BlindRestoreError(Exception):
    pass


class DimensionError(BlindRestoreError, ValueError):
    """Operand shapes or channel counts do not line up."""


class ConfigurationError(BlindRestoreError, ValueError):
    """Invalid parameter or configuration value."""


class StepError(BlindRestoreError, IndexError):
    """Diffusion step outside 1..T."""


class GuidanceError(BlindRestoreError, ValueError):
    """Guidance scale cannot be evaluated (e.g. non-positive loss)."""


class MetricError(BlindRestoreError, ValueError):
    """A metric is undefined for the given inputs."""


class SamplingDivergedError(BlindRestoreError, FloatingPointError):
    """Non-finite values appeared during reverse sampling."""

    def __init__(self, step: int, what: str = "state"):
        self.step = step
        self.what = what
        super().__init__(f"sampling diverged at step t={step}: non-finite {what}")
