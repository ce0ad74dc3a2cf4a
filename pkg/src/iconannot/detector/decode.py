from __future__ import annotations

from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F

from ..corpus import ICON_CLASSES, BoundingBox, Detection
from .config import DetectorConfig
from .model import DetectorOutput

_MIN_SIZE_CELLS = 1e-3


def find_peaks(heat: torch.Tensor, cross_class: bool = False) -> torch.Tensor:
    """Boolean mask of 3x3 local maxima in a classes x H x W heatmap.

    A cell is a peak when it equals its neighborhood maximum and the
    neighborhood is not flat, so a constant map has no peaks. With
    ``cross_class`` it must also reach the 3x3 maximum over all classes, so
    a location carries at most one label (equal scores keep every class).
    """
    x = heat.unsqueeze(0)
    hmax = F.max_pool2d(x, 3, stride=1, padding=1)
    hmin = -F.max_pool2d(-x, 3, stride=1, padding=1)
    peaks = (x == hmax) & (hmin < x)
    if cross_class:
        peaks &= x == F.max_pool2d(x.amax(1, keepdim=True), 3, stride=1, padding=1)
    return peaks[0]


def decode_one(
    heat: torch.Tensor,
    size: torch.Tensor,
    offset: torch.Tensor,
    config: DetectorConfig,
    threshold: Optional[float] = None,
) -> list[Detection]:
    """Detections for one image from classes x H x W heatmap probabilities."""
    thr = config.threshold if threshold is None else threshold
    C, H, W = heat.shape
    peaks = find_peaks(heat, config.cross_class_peaks)
    cls_idx, rows, cols = (t.numpy() for t in torch.nonzero(peaks, as_tuple=True))
    heat_np = heat.detach().double().numpy()
    scores = heat_np[cls_idx, rows, cols]
    keep = scores >= thr
    cls_idx, rows, cols, scores = cls_idx[keep], rows[keep], cols[keep], scores[keep]
    order = np.lexsort((cls_idx, cols, rows, -scores))[: config.max_detections]
    size_np = size.detach().double().numpy()
    off_np = offset.detach().double().numpy()
    out = []
    for i in order:
        k, r, c = int(cls_idx[i]), int(rows[i]), int(cols[i])
        cx = min(max((c + 0.5 + off_np[0, r, c]) / W, 0.0), 1.0)
        cy = min(max((r + 0.5 + off_np[1, r, c]) / H, 0.0), 1.0)
        half_w = max(size_np[0, r, c], _MIN_SIZE_CELLS) / W / 2
        half_h = max(size_np[1, r, c], _MIN_SIZE_CELLS) / H / 2
        box = BoundingBox(max(cx - half_w, 0.0), max(cy - half_h, 0.0), min(cx + half_w, 1.0), min(cy + half_h, 1.0))
        out.append(Detection(box, ICON_CLASSES[k], float(min(max(scores[i], 0.0), 1.0))))
    return out


def decode(output: DetectorOutput, config: DetectorConfig, threshold: Optional[float] = None) -> list[list[Detection]]:
    """Per-image detections sorted by descending score (ties by row, col, class)."""
    heat = output.heatmap
    return [
        decode_one(heat[n], output.size[n], output.offset[n], config, threshold)
        for n in range(heat.shape[0])
    ]
