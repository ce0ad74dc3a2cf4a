from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..corpus import NUM_ICON_CLASSES
from ..vh_featmap import AS_WRITTEN, COVER_MEAN


@dataclass(frozen=True)
class DetectorConfig:
    """Detector shape and decoding settings.

    ``input_h`` x ``input_w`` is the network input (landscape by default);
    the output grid is ``input_h // stride`` x ``input_w // stride``.
    """

    input_h: int = 384
    input_w: int = 768
    stride: int = 4
    widths: tuple[int, int, int] = (16, 32, 64)
    feature_dim: int = 64
    head_width: int = 64
    num_classes: int = NUM_ICON_CLASSES
    use_vh: bool = True
    text_dim: int = 128
    text_seed: int = 0
    vh_normalization: str = AS_WRITTEN
    threshold: float = 0.2
    max_detections: int = 100
    # one label per location: a peak must also top every class in its 3x3
    cross_class_peaks: bool = True
    focal_alpha: float = 2.0
    focal_beta: float = 4.0
    size_weight: float = 0.1
    offset_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.stride != 4:
            raise ValueError("the backbone has a fixed output stride of 4")
        if self.input_h % self.stride or self.input_w % self.stride:
            raise ValueError(f"input {self.input_h}x{self.input_w} must be divisible by {self.stride}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.vh_normalization not in (AS_WRITTEN, COVER_MEAN):
            raise ValueError(f"unknown vh_normalization {self.vh_normalization!r}")
        if self.num_classes < 1 or self.max_detections < 1:
            raise ValueError("num_classes and max_detections must be positive")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))

    @property
    def grid(self) -> tuple[int, int]:
        return self.input_h // self.stride, self.input_w // self.stride

    def to_json(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "DetectorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown detector config keys: {sorted(unknown)}")
        return cls(**obj)
