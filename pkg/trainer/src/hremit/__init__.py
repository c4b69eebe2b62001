"""hremit: trains a small spectro-temporal network on labelled PPG sessions
and exports per-window heart-rate distributions in the shared emission file
format consumed by the tracking package."""

from .augment import augment, stretch
from .errors import ConfigError, FormatError, TrainerError, TrainingError
from .frontend import LabeledSession, RawWindow, cut_windows, featurize, load_session
from .grid import GridDist, LabelGrid, cross_entropy, entropy, gaussian_target
from .model import EmissionNet, soft_cross_entropy
from .train import (
    TrainConfig,
    config_from_text,
    predict_emissions,
    save_emissions,
    train_and_export,
    train_model,
)

__all__ = [
    "ConfigError",
    "EmissionNet",
    "FormatError",
    "GridDist",
    "LabelGrid",
    "LabeledSession",
    "RawWindow",
    "TrainConfig",
    "TrainerError",
    "TrainingError",
    "augment",
    "config_from_text",
    "cross_entropy",
    "cut_windows",
    "entropy",
    "featurize",
    "gaussian_target",
    "load_session",
    "predict_emissions",
    "save_emissions",
    "soft_cross_entropy",
    "stretch",
    "train_and_export",
    "train_model",
]

__version__ = "0.1.0"
