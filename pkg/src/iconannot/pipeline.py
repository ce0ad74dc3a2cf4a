"""Model types, training entry points and prediction shared by the CLI and experiments.

Model types mirror the compared systems:

    detector-vh            detector with VH feature-map fusion
    detector-image         same detector, pixels only
    baseline-image         VH-leaf candidates, crop classifier
    baseline-vh            + leaf text and location
    baseline-vh-sampling   + resource-id sampling during training
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

from .baseline import (
    ClassifierConfig,
    ClassifierTrainSettings,
    IconClassifier,
    classifier_from_checkpoint,
    predict_sample,
    train_classifier,
)
from .checkpoint import Checkpoint, load_checkpoint
from .corpus import Detection, UISample
from .detector import DetectorConfig, IconDetector, TrainSettings, predict, train_detector
from .detector.train import detector_from_checkpoint

DETECTOR_TYPES = ("detector-vh", "detector-image")
BASELINE_TYPES = ("baseline-image", "baseline-vh", "baseline-vh-sampling")
MODEL_TYPES = DETECTOR_TYPES + BASELINE_TYPES

Model = Union[IconDetector, IconClassifier]


@dataclass
class ModelSpec:
    """Everything needed to train one model type; JSON round-trippable."""

    model_type: str
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    detector_train: TrainSettings = field(default_factory=TrainSettings)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    classifier_train: ClassifierTrainSettings = field(default_factory=ClassifierTrainSettings)

    def __post_init__(self) -> None:
        if self.model_type not in MODEL_TYPES:
            raise ValueError(f"unknown model type {self.model_type!r}; expected one of {MODEL_TYPES}")
        t = self.model_type
        if t in DETECTOR_TYPES:
            self.detector = replace(self.detector, use_vh=t == "detector-vh")
        else:
            self.classifier = replace(
                self.classifier,
                use_text=t != "baseline-image",
                use_location=t != "baseline-image",
                sampling=t == "baseline-vh-sampling",
            )

    @property
    def is_detector(self) -> bool:
        return self.model_type in DETECTOR_TYPES

    @classmethod
    def from_json(cls, model_type: str, obj: Optional[dict] = None) -> "ModelSpec":
        obj = obj or {}
        return cls(
            model_type,
            DetectorConfig.from_json(obj.get("detector", {})),
            TrainSettings(**obj.get("detector_train", {})),
            ClassifierConfig.from_json(obj.get("classifier", {})),
            ClassifierTrainSettings(**obj.get("classifier_train", {})),
        )

    def to_json(self) -> dict:
        return {
            "model_type": self.model_type,
            "detector": self.detector.to_json(),
            "detector_train": self.detector_train.to_json(),
            "classifier": self.classifier.to_json(),
            "classifier_train": self.classifier_train.to_json(),
        }


@dataclass
class TrainedModel:
    model_type: str
    model: Model
    log: list[dict]


def train_model(spec: ModelSpec, samples: Sequence[UISample], seed: int, out_dir: Optional[Path] = None) -> TrainedModel:
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    if spec.is_detector:
        res = train_detector(samples, spec.detector, spec.detector_train, seed, out_dir, spec.model_type)
        model_log = res.log
        model: Model = res.model
    else:
        cres = train_classifier(samples, spec.classifier, spec.classifier_train, seed, out_dir, spec.model_type)
        model_log = cres.log
        model = cres.model
    if out_dir is not None:
        with open(out_dir / "metrics_log.jsonl", "w", encoding="utf-8") as f:
            for entry in model_log:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
    return TrainedModel(spec.model_type, model, model_log)


def model_from_checkpoint(ckpt: Checkpoint) -> Model:
    if ckpt.model_type in DETECTOR_TYPES or ckpt.model_type == "detector":
        return detector_from_checkpoint(ckpt)
    if ckpt.model_type in BASELINE_TYPES or ckpt.model_type == "baseline":
        return classifier_from_checkpoint(ckpt)
    raise ValueError(f"checkpoint has unknown model type {ckpt.model_type!r}")


def load_model(path: Path | str) -> Model:
    return model_from_checkpoint(load_checkpoint(path))


def predict_samples(model: Model, samples: Sequence[UISample], threshold: Optional[float] = None) -> list[list[Detection]]:
    """Per-sample detections. Detector output is cut at ``threshold`` (config
    default when None); the baseline keeps every non-OTHER candidate."""
    if isinstance(model, IconDetector):
        return predict(model, samples, threshold)
    return [predict_sample(s, model) for s in samples]
