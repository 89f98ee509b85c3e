"""Accident anticipation on precomputed object and frame features.

The package is organized bottom up:

* :mod:`latte.autodiff` reverse-mode differentiation over numpy arrays;
* :mod:`latte.features` and :mod:`latte.synth` data containers, the LFS1
  format and the synthetic generator;
* :mod:`latte.emsa`, :mod:`latte.maa`, :mod:`latte.aaa` attention modules;
* :mod:`latte.model`, :mod:`latte.training`, :mod:`latte.metrics` and
  :mod:`latte.profiler` for the full pipeline.
"""

from .features import FeatureSequence, SpatialLayout, load_dataset, spatialize, store_dataset
from .metrics import EvalResult, average_precision, evaluate, evaluate_model, time_to_accident
from .model import (
    AlertRecord,
    ModelConfig,
    PredictionSeries,
    attribute_entities,
    generate_alerts,
    init_params,
    load_checkpoint,
    predict_video,
    save_checkpoint,
)
from .profiler import CostProfile, profile_model
from .synth import SynthConfig, split_dataset, synthesize_dataset
from .training import LossConfig, TrainConfig, frame_loss, total_loss, train, video_loss

__version__ = "0.1.0"

__all__ = [
    "AlertRecord",
    "CostProfile",
    "EvalResult",
    "FeatureSequence",
    "LossConfig",
    "ModelConfig",
    "PredictionSeries",
    "SpatialLayout",
    "SynthConfig",
    "TrainConfig",
    "attribute_entities",
    "average_precision",
    "evaluate",
    "evaluate_model",
    "frame_loss",
    "generate_alerts",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "predict_video",
    "profile_model",
    "save_checkpoint",
    "spatialize",
    "split_dataset",
    "store_dataset",
    "synthesize_dataset",
    "time_to_accident",
    "total_loss",
    "train",
    "video_loss",
]
