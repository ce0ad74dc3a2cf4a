from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from ..corpus import IconAnnotation
from .config import DetectorConfig


@dataclass
class Targets:
    heatmap: np.ndarray  # classes x H x W, peak 1.0 at each center cell
    size: np.ndarray  # 2 x H x W, (width, height) in cells
    offset: np.ndarray  # 2 x H x W, center minus cell center, in cells
    mask: np.ndarray  # H x W bool, cells carrying size/offset supervision

    @property
    def num_objects(self) -> int:
        return int(self.mask.sum())


def gaussian_sigma(w_cells: float, h_cells: float) -> float:
    return max(1.0, min(w_cells, h_cells) / 6.0)


def center_cell(cx: float, cy: float, H: int, W: int) -> tuple[int, int]:
    """(row, col) of the cell containing a center given in grid units."""
    return min(max(int(np.floor(cy)), 0), H - 1), min(max(int(np.floor(cx)), 0), W - 1)


def encode_targets(annotations: Sequence[IconAnnotation], config: DetectorConfig) -> Targets:
    """Gaussian center heatmaps plus size/offset at the center cells.

    Cell (r, c) has its center at (c + 0.5, r + 0.5) in grid units, so a box
    centered on a cell center gets a zero offset.
    """
    H, W = config.grid
    heat = np.zeros((config.num_classes, H, W), dtype=np.float32)
    size = np.zeros((2, H, W), dtype=np.float32)
    offset = np.zeros((2, H, W), dtype=np.float32)
    mask = np.zeros((H, W), dtype=bool)
    rows = np.arange(H)[:, None]
    cols = np.arange(W)[None, :]
    for ann in annotations:
        b = ann.bbox
        cx, cy = (b.x_min + b.x_max) / 2 * W, (b.y_min + b.y_max) / 2 * H
        w, h = b.width * W, b.height * H
        r, c = center_cell(cx, cy, H, W)
        sigma = gaussian_sigma(w, h)
        splat = np.exp(-((rows - r) ** 2 + (cols - c) ** 2) / (2 * sigma * sigma)).astype(np.float32)
        splat[r, c] = 1.0
        k = ann.label.index
        np.maximum(heat[k], splat, out=heat[k])
        size[:, r, c] = (w, h)
        offset[:, r, c] = (cx - (c + 0.5), cy - (r + 0.5))
        mask[r, c] = True
    return Targets(heat, size, offset, mask)


@dataclass
class TargetBatch:
    heatmap: torch.Tensor
    size: torch.Tensor
    offset: torch.Tensor
    mask: torch.Tensor

    @classmethod
    def stack(cls, targets: Sequence[Targets], dtype=torch.float32) -> "TargetBatch":
        return cls(
            torch.from_numpy(np.stack([t.heatmap for t in targets])).to(dtype),
            torch.from_numpy(np.stack([t.size for t in targets])).to(dtype),
            torch.from_numpy(np.stack([t.offset for t in targets])).to(dtype),
            torch.from_numpy(np.stack([t.mask for t in targets])),
        )
