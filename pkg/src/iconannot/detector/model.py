"""Keypoint-style detector: small encoder-decoder backbone, optional VH fusion,
heatmap / size / offset heads. Tensors are N x C x H x W."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from torch import nn

from ..corpus import UISample, VHNode
from ..textproc import HashedTextEncoder
from ..vh_featmap import VHFusion, aggregate, to_chw
from .config import DetectorConfig


@dataclass
class DetectorOutput:
    heatmap_logits: torch.Tensor  # N x classes x H x W
    size: torch.Tensor  # N x 2 x H x W, (width, height) in grid cells
    offset: torch.Tensor  # N x 2 x H x W, (dx, dy) from the cell center

    @property
    def heatmap(self) -> torch.Tensor:
        return torch.sigmoid(self.heatmap_logits)


def _conv(cin: int, cout: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class Backbone(nn.Module):
    """Three stride-2 stages down to 1/8, one skip-connected upsample to 1/4."""

    def __init__(self, widths: Sequence[int], out_dim: int):
        super().__init__()
        w0, w1, w2 = widths
        self.stem = _conv(3, w0, stride=2)
        self.down1 = nn.Sequential(_conv(w0, w1, stride=2), _conv(w1, w1))
        self.down2 = nn.Sequential(_conv(w1, w2, stride=2), _conv(w2, w2))
        self.fuse = _conv(w1 + w2, out_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.stem(x)
        s4 = self.down1(x)
        s8 = self.down2(s4)
        up = F.interpolate(s8, size=s4.shape[-2:], mode="nearest")
        return self.fuse(torch.cat([s4, up], dim=1))


class IconDetector(nn.Module):
    def __init__(self, config: DetectorConfig):
        super().__init__()
        self.config = config
        D = config.feature_dim
        self.backbone = Backbone(config.widths, D)
        self.vh_fusion = VHFusion(config.text_dim, D) if config.use_vh else None
        self.head = nn.Sequential(nn.Conv2d(D, config.head_width, 3, padding=1), nn.ReLU(inplace=True))
        self.heatmap = nn.Conv2d(config.head_width, config.num_classes, 1)
        self.size = nn.Conv2d(config.head_width, 2, 1)
        self.offset = nn.Conv2d(config.head_width, 2, 1)
        # Start the heatmap near a 0.1 prior so the focal loss is not swamped.
        nn.init.constant_(self.heatmap.bias, -math.log((1 - 0.1) / 0.1))

    def features(self, images: torch.Tensor, vh_map: Optional[torch.Tensor] = None) -> torch.Tensor:
        c = self.backbone(images)
        if self.vh_fusion is not None:
            if vh_map is None:
                vh_map = c.new_zeros((c.shape[0], self.config.text_dim, *c.shape[-2:]))
            c = self.vh_fusion(vh_map, c)
        return c

    def forward(self, images: torch.Tensor, vh_map: Optional[torch.Tensor] = None) -> DetectorOutput:
        h = self.head(self.features(images, vh_map))
        return DetectorOutput(self.heatmap(h), self.size(h), self.offset(h))


class InputEncoder:
    """Turns UISamples into network inputs for a given config."""

    def __init__(self, config: DetectorConfig, encoder: Optional[HashedTextEncoder] = None):
        self.config = config
        self.encoder = encoder or HashedTextEncoder(config.text_dim, config.text_seed)
        if self.encoder.dim != config.text_dim:
            raise ValueError("text encoder dimension differs from config.text_dim")

    def image(self, pixels: np.ndarray) -> np.ndarray:
        """uint8 3 x H x W at the configured input size."""
        h, w = self.config.input_h, self.config.input_w
        if pixels.shape[:2] != (h, w):
            pixels = np.asarray(Image.fromarray(pixels).resize((w, h), Image.BILINEAR))
        return np.ascontiguousarray(pixels.transpose(2, 0, 1))

    def node_embeddings(self, leaves: Sequence[VHNode]) -> list[tuple[np.ndarray, object]]:
        return [(self.encoder.encode_node(n), n.bounds) for n in leaves]

    def vh_map(self, nodes: list[tuple[np.ndarray, object]]) -> torch.Tensor:
        H, W = self.config.grid
        g = aggregate(nodes, H, W, self.config.text_dim, self.config.vh_normalization)
        return to_chw(g)

    def batch(self, samples: Sequence[UISample]) -> tuple[torch.Tensor, Optional[torch.Tensor]]:
        images = images_to_tensor([self.image(s.pixels) for s in samples])
        if not self.config.use_vh:
            return images, None
        return images, torch.stack([self.vh_map(self.node_embeddings(s.vh_leaves)) for s in samples])


def images_to_tensor(images: Sequence[np.ndarray]) -> torch.Tensor:
    x = torch.from_numpy(np.stack(images)).float() / 255.0
    return (x - 0.5) / 0.25
