from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .. import seeding
from ..checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ..corpus import Detection, UISample
from ..textproc import HashedTextEncoder
from .config import DetectorConfig
from .decode import decode
from .loss import detection_loss
from .model import IconDetector, InputEncoder, images_to_tensor
from .targets import TargetBatch, encode_targets

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 30
    batch_size: int = 8
    lr: float = 2e-3
    weight_decay: float = 1e-4
    warmup_frac: float = 0.03
    grad_clip: float = 10.0
    max_steps: Optional[int] = None

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: IconDetector
    log: list[dict] = field(default_factory=list)


def lr_factor(step: int, total: int, warmup_frac: float) -> float:
    warm = max(1, int(total * warmup_frac))
    if step < warm:
        return (step + 1) / warm
    t = (step - warm) / max(1, total - warm)
    return 0.5 * (1 + math.cos(math.pi * min(t, 1.0)))


class _Prepared:
    """Per-sample inputs that do not change across epochs."""

    def __init__(self, samples: Sequence[UISample], inputs: InputEncoder):
        cfg = inputs.config
        self.inputs = inputs
        self.images = [inputs.image(s.pixels) for s in samples]
        self.targets = [encode_targets(s.annotations, cfg) for s in samples]
        self.nodes = [inputs.node_embeddings(s.vh_leaves) for s in samples] if cfg.use_vh else None

    def batch(self, idx: Sequence[int]):
        images = images_to_tensor([self.images[i] for i in idx])
        vh = None
        if self.nodes is not None:
            vh = torch.stack([self.inputs.vh_map(self.nodes[i]) for i in idx])
        return images, vh, TargetBatch.stack([self.targets[i] for i in idx])


def detector_checkpoint(model: IconDetector, model_type: str, extra: Optional[dict] = None) -> Checkpoint:
    return Checkpoint(model_type, model.config.to_json(), dict(model.state_dict()), extra or {})


def detector_from_checkpoint(ckpt: Checkpoint) -> IconDetector:
    model = IconDetector(DetectorConfig.from_json(ckpt.config))
    model.load_state_dict(ckpt.state)
    model.eval()
    return model


def train_detector(
    samples: Sequence[UISample],
    config: DetectorConfig,
    settings: TrainSettings = TrainSettings(),
    seed: int = 0,
    out_dir: Optional[Path] = None,
    model_type: str = "detector",
    on_epoch: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """Train from scratch; deterministic given ``seed``.

    Writes ``checkpoint.npz`` to ``out_dir`` after every epoch when given.
    """
    if not samples:
        raise ValueError("cannot train on an empty corpus")
    torch.manual_seed(seeding.int_seed(seed, "init"))
    model = IconDetector(config)
    data_rng = seeding.rng(seed, "data")
    prepared = _Prepared(samples, InputEncoder(config))
    opt = torch.optim.AdamW(model.parameters(), lr=settings.lr, weight_decay=settings.weight_decay)
    n = len(samples)
    steps_per_epoch = math.ceil(n / settings.batch_size)
    total = steps_per_epoch * settings.epochs
    if settings.max_steps is not None:
        total = min(total, settings.max_steps)
    result = TrainResult(model)
    step = 0
    for epoch in range(settings.epochs):
        if step >= total:
            break
        model.train()
        order = data_rng.permutation(n)
        sums: dict[str, float] = {}
        n_batches = 0
        t0 = time.perf_counter()
        for b in range(steps_per_epoch):
            if step >= total:
                break
            idx = order[b * settings.batch_size : (b + 1) * settings.batch_size]
            images, vh, targets = prepared.batch(idx)
            for g in opt.param_groups:
                g["lr"] = settings.lr * lr_factor(step, total, settings.warmup_frac)
            loss, terms = detection_loss(
                model(images, vh), targets, config.focal_alpha, config.focal_beta, config.size_weight, config.offset_weight
            )
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}: {terms}")
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), settings.grad_clip)
            opt.step()
            step += 1
            n_batches += 1
            for k, v in terms.items():
                sums[k] = sums.get(k, 0.0) + v
        entry = {"epoch": epoch, "steps": step, **{k: v / n_batches for k, v in sums.items()}}
        result.log.append(entry)
        log.info("epoch %d loss %.4f (%.1fs)", epoch, entry["total"], time.perf_counter() - t0)
        if on_epoch is not None:
            on_epoch(entry)
        if out_dir is not None:
            save_checkpoint(Path(out_dir) / "checkpoint.npz", detector_checkpoint(model, model_type, {"epoch": epoch}))
    model.eval()
    return result


@torch.no_grad()
def predict(
    model: IconDetector,
    samples: Sequence[UISample],
    threshold: Optional[float] = None,
    batch_size: int = 16,
) -> list[list[Detection]]:
    model.eval()
    inputs = InputEncoder(model.config)
    out: list[list[Detection]] = []
    for i in range(0, len(samples), batch_size):
        images, vh = inputs.batch(samples[i : i + batch_size])
        out.extend(decode(model(images, vh), model.config, threshold))
    return out


def load_detector(path: Path | str) -> IconDetector:
    return detector_from_checkpoint(load_checkpoint(path))
