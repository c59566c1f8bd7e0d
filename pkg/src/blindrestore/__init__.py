"""Blind image restoration by guided reverse diffusion with a learnable degradation model."""

from .degradation import DegradationModel, init_model
from .errors import (
    BlindRestoreError,
    ConfigurationError,
    DimensionError,
    GuidanceError,
    MetricError,
    SamplingDivergedError,
    StepError,
)
from .prior import GaussianMixturePrior, OraclePredictor, oracle_predict
from .sampler import RestorationRun, SamplerConfig, restore, restore_batch
from .schedule import DiffusionSchedule, make_linear_schedule

__version__ = "0.1.0"

__all__ = [
    "BlindRestoreError",
    "ConfigurationError",
    "DegradationModel",
    "DiffusionSchedule",
    "DimensionError",
    "GaussianMixturePrior",
    "GuidanceError",
    "MetricError",
    "OraclePredictor",
    "RestorationRun",
    "SamplerConfig",
    "SamplingDivergedError",
    "StepError",
    "init_model",
    "make_linear_schedule",
    "oracle_predict",
    "restore",
    "restore_batch",
]
