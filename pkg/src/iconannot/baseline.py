"""Two-stage baseline: every VH leaf is a candidate, a classifier labels it.

The classifier sees the candidate crop, optionally the leaf's text
embedding and its normalized box, and predicts one of the 29 icon classes
or OTHER. Icons without a VH leaf can never be found.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch import nn

from . import seeding
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .corpus import ALL_CLASSES, Detection, IconAnnotation, IconClass, UISample, VHNode
from .detector.train import TrainingDiverged
from .textproc import HashedTextEncoder, NoSampleAvailable, ResourceIdDictionary, build_rid_dictionary, sample_rid

log = logging.getLogger(__name__)

NUM_OUTPUTS = len(ALL_CLASSES)  # 29 icons + OTHER
OTHER_INDEX = IconClass.OTHER.index


@dataclass
class Candidate:
    node: VHNode
    crop: np.ndarray  # crop_size x crop_size x 3 uint8
    text: np.ndarray  # K
    location: np.ndarray  # (x_min, y_min, x_max, y_max)
    leaf_index: int


@dataclass(frozen=True)
class ClassifierConfig:
    crop_size: int = 225
    use_text: bool = True
    use_location: bool = True
    sampling: bool = False
    encoder_widths: tuple[int, int, int, int] = (16, 32, 64, 64)
    text_dim: int = 128
    text_seed: int = 0
    score_cutoff: Optional[float] = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["encoder_widths"] = list(self.encoder_widths)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "ClassifierConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown classifier config keys: {sorted(unknown)}")
        obj = dict(obj)
        if "encoder_widths" in obj:
            obj["encoder_widths"] = tuple(obj["encoder_widths"])
        return cls(**obj)


def crop_box(pixels: np.ndarray, node: VHNode) -> Optional[tuple[int, int, int, int]]:
    h, w = pixels.shape[:2]
    b = node.bounds
    x0, y0 = int(math.floor(b.x_min * w)), int(math.floor(b.y_min * h))
    x1, y1 = int(math.ceil(b.x_max * w)), int(math.ceil(b.y_max * h))
    x0, y0, x1, y1 = max(x0, 0), max(y0, 0), min(x1, w), min(y1, h)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def make_crop(pixels: np.ndarray, node: VHNode, size: int) -> Optional[np.ndarray]:
    box = crop_box(pixels, node)
    if box is None:
        return None
    x0, y0, x1, y1 = box
    patch = Image.fromarray(pixels[y0:y1, x0:x1])
    return np.asarray(patch.resize((size, size), Image.BILINEAR), dtype=np.uint8)


def propose_candidates(
    sample: UISample,
    crop_size: int = 225,
    encoder: Optional[HashedTextEncoder] = None,
    with_crops: bool = True,
) -> list[Candidate]:
    """One candidate per VH leaf whose box covers at least one pixel."""
    encoder = encoder or HashedTextEncoder()
    out = []
    for k, node in enumerate(sample.vh_leaves):
        if crop_box(sample.pixels, node) is None:
            log.warning("%s: leaf %d covers no pixels, skipped", sample.id, k)
            continue
        crop = make_crop(sample.pixels, node, crop_size) if with_crops else np.zeros((0, 0, 3), np.uint8)
        b = node.bounds
        out.append(Candidate(node, crop, encoder.encode_node(node), np.array(b.as_tuple()), k))
    return out


def candidate_label(node: VHNode, annotations: Sequence[IconAnnotation], min_iou: float = 0.5) -> IconClass:
    """Icon class whose box holds the leaf center with IOU >= ``min_iou``, else OTHER."""
    cx, cy = node.bounds.center
    best, best_iou = IconClass.OTHER, min_iou
    for a in annotations:
        if not a.bbox.contains(cx, cy):
            continue
        v = a.bbox.iou(node.bounds)
        if v >= best_iou and (best is IconClass.OTHER or v > best_iou):
            best, best_iou = a.label, v
    return best


class IconClassifier(nn.Module):
    def __init__(self, config: ClassifierConfig):
        super().__init__()
        self.config = config
        w = config.encoder_widths
        layers: list[nn.Module] = []
        cin = 3
        for i, cout in enumerate(w):
            # First block downsamples 4x to keep 225px crops cheap on CPU.
            k, s, p = (5, 4, 2) if i == 0 else (3, 2, 1)
            layers += [nn.Conv2d(cin, cout, k, stride=s, padding=p, bias=False), nn.BatchNorm2d(cout), nn.ReLU(inplace=True)]
            cin = cout
        self.encoder = nn.Sequential(*layers, nn.AdaptiveAvgPool2d(1), nn.Flatten())
        self.image_fc = nn.Sequential(nn.Linear(cin, 1024), nn.ReLU(inplace=True), nn.Linear(1024, 128), nn.ReLU(inplace=True))
        joint_in = 128 + (config.text_dim if config.use_text else 0) + (4 if config.use_location else 0)
        self.joint = nn.Linear(joint_in, 128)
        self.classifier = nn.Linear(128, NUM_OUTPUTS)

    def forward(self, crops: torch.Tensor, text: torch.Tensor, location: torch.Tensor) -> torch.Tensor:
        """Logits over the 29 classes + OTHER."""
        parts = [self.image_fc(self.encoder(crops))]
        if self.config.use_text:
            parts.append(text)
        if self.config.use_location:
            parts.append(location)
        return self.classifier(torch.relu(self.joint(torch.cat(parts, dim=1))))


def _crops_tensor(crops: Sequence[np.ndarray], dtype=torch.float32) -> torch.Tensor:
    x = torch.from_numpy(np.stack(crops).transpose(0, 3, 1, 2).copy()).to(dtype) / 255.0
    return (x - 0.5) / 0.25


def batch_inputs(cands: Sequence[Candidate], dtype=torch.float32) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    return (
        _crops_tensor([c.crop for c in cands], dtype),
        torch.from_numpy(np.stack([c.text for c in cands])).to(dtype),
        torch.from_numpy(np.stack([c.location for c in cands])).to(dtype),
    )


@torch.no_grad()
def classify(cands: Sequence[Candidate], model: IconClassifier) -> np.ndarray:
    """Class probabilities, one row per candidate (columns follow ALL_CLASSES)."""
    if not cands:
        return np.zeros((0, NUM_OUTPUTS))
    model.eval()
    dtype = next(model.parameters()).dtype
    logits = model(*batch_inputs(cands, dtype))
    return torch.softmax(logits.double(), dim=1).numpy()


def predict_sample(
    sample: UISample,
    model: IconClassifier,
    score_cutoff: Optional[float] = None,
    encoder: Optional[HashedTextEncoder] = None,
) -> list[Detection]:
    """Candidates whose argmax is not OTHER, scored by that class probability."""
    cfg = model.config
    cutoff = cfg.score_cutoff if score_cutoff is None else score_cutoff
    encoder = encoder or HashedTextEncoder(cfg.text_dim, cfg.text_seed)
    cands = propose_candidates(sample, cfg.crop_size, encoder)
    probs = classify(cands, model)
    dets = []
    for c, p in zip(cands, probs):
        k = int(np.argmax(p))
        if k == OTHER_INDEX or (cutoff is not None and p[k] < cutoff):
            continue
        dets.append(Detection(c.node.bounds, ALL_CLASSES[k], float(min(p[k], 1.0))))
    dets.sort(key=lambda d: (-d.score, d.bbox.as_tuple()))
    return dets


# --------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class ClassifierTrainSettings:
    epochs: int = 12
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 1e-4

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ClassifierTrainResult:
    model: IconClassifier
    rid_dictionary: Optional[ResourceIdDictionary]
    log: list[dict] = field(default_factory=list)


@dataclass
class _Item:
    sample: int
    node: VHNode
    label: int
    text: np.ndarray
    needs_rid: bool


def classifier_checkpoint(model: IconClassifier, model_type: str, rid_dictionary=None, extra=None) -> Checkpoint:
    ex = dict(extra or {})
    if rid_dictionary is not None:
        ex["rid_dictionary"] = rid_dictionary.to_json()
    return Checkpoint(model_type, model.config.to_json(), dict(model.state_dict()), ex)


def classifier_from_checkpoint(ckpt: Checkpoint) -> IconClassifier:
    model = IconClassifier(ClassifierConfig.from_json(ckpt.config))
    model.load_state_dict(ckpt.state)
    model.eval()
    return model


def load_classifier(path: Path | str) -> IconClassifier:
    return classifier_from_checkpoint(load_checkpoint(path))


def train_classifier(
    samples: Sequence[UISample],
    config: ClassifierConfig,
    settings: ClassifierTrainSettings = ClassifierTrainSettings(),
    seed: int = 0,
    out_dir: Optional[Path] = None,
    model_type: str = "baseline",
    on_epoch: Optional[Callable[[dict], None]] = None,
) -> ClassifierTrainResult:
    """Train on every VH leaf of ``samples``; deterministic given ``seed``.

    With ``config.sampling`` on, icon candidates lacking a resource-id get one
    drawn from the per-class dictionary, freshly each epoch.
    """
    if not samples:
        raise ValueError("cannot train on an empty corpus")
    encoder = HashedTextEncoder(config.text_dim, config.text_seed)
    rid_dict = build_rid_dictionary(samples) if config.sampling else None
    items: list[_Item] = []
    for si, s in enumerate(samples):
        for node in s.vh_leaves:
            if crop_box(s.pixels, node) is None:
                continue
            label = candidate_label(node, s.annotations)
            items.append(_Item(si, node, label.index, encoder.encode_node(node), label is not IconClass.OTHER and not node.resource_id))
    if not items:
        raise ValueError("no candidates in the training corpus")

    torch.manual_seed(seeding.int_seed(seed, "init"))
    model = IconClassifier(config)
    data_rng = seeding.rng(seed, "data")
    sampling_rng = seeding.rng(seed, "sampling")
    opt = torch.optim.AdamW(model.parameters(), lr=settings.lr, weight_decay=settings.weight_decay)
    steps_per_epoch = math.ceil(len(items) / settings.batch_size)
    total = steps_per_epoch * settings.epochs
    sched = torch.optim.lr_scheduler.LambdaLR(opt, lambda t: 0.5 * (1 + math.cos(math.pi * min(t / total, 1.0))))
    labels = torch.tensor([it.label for it in items])
    loc = torch.from_numpy(np.stack([np.array(it.node.bounds.as_tuple()) for it in items])).float()
    result = ClassifierTrainResult(model, rid_dict)
    for epoch in range(settings.epochs):
        texts = np.stack([it.text for it in items])
        n_sampled = 0
        if rid_dict is not None:
            for k, it in enumerate(items):
                if not it.needs_rid:
                    continue
                try:
                    rid = sample_rid(rid_dict, ALL_CLASSES[it.label], sampling_rng)
                except NoSampleAvailable:
                    continue
                texts[k] = encoder.encode_node(it.node, rid_override=rid)
                n_sampled += 1
        text_t = torch.from_numpy(texts).float()
        order = data_rng.permutation(len(items))
        model.train()
        loss_sum, correct = 0.0, 0
        for b in range(steps_per_epoch):
            idx = order[b * settings.batch_size : (b + 1) * settings.batch_size]
            crops = _crops_tensor([make_crop(samples[items[i].sample].pixels, items[i].node, config.crop_size) for i in idx])
            logits = model(crops, text_t[idx], loc[idx])
            loss = F.cross_entropy(logits, labels[idx])
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"non-finite classifier loss at epoch {epoch}, batch {b}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
            loss_sum += loss.item() * len(idx)
            correct += int((logits.argmax(1) == labels[idx]).sum())
        entry = {"epoch": epoch, "loss": loss_sum / len(items), "train_acc": correct / len(items), "sampled": n_sampled}
        result.log.append(entry)
        log.info("epoch %d loss %.4f acc %.3f", epoch, entry["loss"], entry["train_acc"])
        if on_epoch is not None:
            on_epoch(entry)
        if out_dir is not None:
            save_checkpoint(Path(out_dir) / "checkpoint.npz", classifier_checkpoint(model, model_type, rid_dict, {"epoch": epoch}))
    model.eval()
    return result
