"""Rasterize VH node embeddings onto the detector grid and fuse them in.

Maps here are H x W x channels (numpy); the torch fusion layer works on
N x channels x H x W like the rest of the detector.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import torch
from torch import nn

from .corpus import BoundingBox

AS_WRITTEN = "as_written"
COVER_MEAN = "cover_mean"


def overlay_mask(b: BoundingBox, H: int, W: int) -> np.ndarray:
    """Boolean H x W mask: row p covered iff y_min*H <= p < y_max*H, same for columns with x and W."""
    p = np.arange(H)
    q = np.arange(W)
    rows = (b.y_min * H <= p) & (p < b.y_max * H)
    cols = (b.x_min * W <= q) & (q < b.x_max * W)
    return rows[:, None] & cols[None, :]


def calc_overlay(b: BoundingBox, H: int, W: int, K: int) -> np.ndarray:
    """Binary H x W x K overlay of a box on the grid; every channel identical."""
    if min(H, W, K) < 1:
        raise ValueError("H, W and K must be >= 1")
    m = overlay_mask(b, H, W).astype(np.float64)
    return np.repeat(m[:, :, None], K, axis=2)


def node_feature(t: np.ndarray, o: np.ndarray) -> np.ndarray:
    """Text embedding tiled over the grid and masked by the overlay."""
    t = np.asarray(t)
    if o.ndim != 3 or t.ndim != 1 or o.shape[2] != t.shape[0]:
        raise ValueError(f"overlay {o.shape} does not match embedding {t.shape}")
    return o * np.broadcast_to(t, o.shape)


def aggregate(
    nodes: Sequence[tuple[np.ndarray, BoundingBox]],
    H: int,
    W: int,
    K: int,
    normalization: str = AS_WRITTEN,
) -> np.ndarray:
    """VH feature map: summed node features over the mean overlay.

    With S nodes, a cell covered by n of them holds S/n times the sum of
    their embeddings, i.e. S times their mean. ``normalization="cover_mean"``
    drops the factor of S. Uncovered cells (and S == 0) are zero.
    """
    if normalization not in (AS_WRITTEN, COVER_MEAN):
        raise ValueError(f"unknown normalization {normalization!r}")
    S = len(nodes)
    total = np.zeros((H, W, K))
    count = np.zeros((H, W))
    for t, b in nodes:
        t = np.asarray(t, dtype=np.float64)
        if t.shape != (K,):
            raise ValueError(f"embedding of shape {t.shape}, expected ({K},)")
        m = overlay_mask(b, H, W)
        if not m.any():
            continue
        total[m] += t
        count[m] += 1
    covered = count > 0
    out = np.zeros_like(total)
    if normalization == AS_WRITTEN:
        out[covered] = total[covered] / (count[covered] / S)[:, None]
    else:
        out[covered] = total[covered] / count[covered][:, None]
    return out


def aggregate_nodes(encoder, leaves: Iterable, H: int, W: int, normalization: str = AS_WRITTEN, rid_overrides=None) -> np.ndarray:
    """Encode VH leaves with ``encoder`` and aggregate them on an H x W grid."""
    leaves = list(leaves)
    overrides = rid_overrides or {}
    nodes = [(encoder.encode_node(n, overrides.get(i)), n.bounds) for i, n in enumerate(leaves)]
    return aggregate(nodes, H, W, encoder.dim, normalization)


class VHFusion(nn.Module):
    """Two 1x1 convolutions taking the K-channel VH map to D channels."""

    def __init__(self, text_dim: int, out_dim: int, hidden: int | None = None):
        super().__init__()
        hidden = text_dim if hidden is None else hidden
        self.proj1 = nn.Conv2d(text_dim, hidden, kernel_size=1)
        self.proj2 = nn.Conv2d(hidden, out_dim, kernel_size=1)

    def project(self, g: torch.Tensor) -> torch.Tensor:
        return self.proj2(torch.relu(self.proj1(g)))

    def forward(self, g: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        return project_and_fuse(g, c, self)


def project_and_fuse(g: torch.Tensor, c: torch.Tensor, params: VHFusion) -> torch.Tensor:
    """``c + proj2(relu(proj1(g)))`` for N x K x H x W ``g`` and N x D x H x W ``c``."""
    if g.shape[0] != c.shape[0] or g.shape[-2:] != c.shape[-2:]:
        raise ValueError(f"VH map {tuple(g.shape)} and image features {tuple(c.shape)} disagree spatially")
    return c + params.project(g)


def to_chw(feature_map: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """H x W x C numpy map -> C x H x W tensor."""
    return torch.from_numpy(np.ascontiguousarray(feature_map.transpose(2, 0, 1))).to(dtype)
