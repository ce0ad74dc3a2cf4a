"""Anchor-free icon detector with optional view-hierarchy fusion."""

from .config import DetectorConfig
from .decode import decode, decode_one, find_peaks
from .loss import detection_loss, focal_loss
from .model import DetectorOutput, IconDetector, InputEncoder
from .targets import TargetBatch, Targets, encode_targets
from .train import TrainingDiverged, TrainResult, TrainSettings, load_detector, predict, train_detector

__all__ = [
    "DetectorConfig",
    "DetectorOutput",
    "IconDetector",
    "InputEncoder",
    "TargetBatch",
    "Targets",
    "TrainResult",
    "TrainSettings",
    "TrainingDiverged",
    "decode",
    "decode_one",
    "detection_loss",
    "encode_targets",
    "find_peaks",
    "focal_loss",
    "load_detector",
    "predict",
    "train_detector",
]
