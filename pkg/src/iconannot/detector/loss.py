from __future__ import annotations

import torch
import torch.nn.functional as F

from .model import DetectorOutput
from .targets import TargetBatch


def focal_loss(logits: torch.Tensor, target: torch.Tensor, alpha: float = 2.0, beta: float = 4.0) -> torch.Tensor:
    """Penalty-reduced focal loss summed over all cells (not normalized).

    Cells where the target equals 1 are positives; elsewhere the negative
    term is damped by (1 - target)^beta near object centers.
    """
    p = torch.sigmoid(logits)
    pos = target.eq(1.0)
    pos_term = -((1 - p) ** alpha) * F.logsigmoid(logits)
    neg_term = -((1 - target) ** beta) * (p**alpha) * F.logsigmoid(-logits)
    return torch.where(pos, pos_term, neg_term).sum()


def detection_loss(
    output: DetectorOutput,
    targets: TargetBatch,
    alpha: float = 2.0,
    beta: float = 4.0,
    size_weight: float = 0.1,
    offset_weight: float = 1.0,
) -> tuple[torch.Tensor, dict[str, float]]:
    if output.heatmap_logits.shape != targets.heatmap.shape:
        raise ValueError(f"heatmap shape {tuple(output.heatmap_logits.shape)} != target {tuple(targets.heatmap.shape)}")
    n_pos = targets.mask.sum().clamp(min=1).to(output.size.dtype)
    heat = focal_loss(output.heatmap_logits, targets.heatmap, alpha, beta) / n_pos
    m = targets.mask.unsqueeze(1).to(output.size.dtype)
    size = (torch.abs(output.size - targets.size) * m).sum() / n_pos
    offset = (torch.abs(output.offset - targets.offset) * m).sum() / n_pos
    total = heat + size_weight * size + offset_weight * offset
    terms = {"heatmap": heat.item(), "size": size.item(), "offset": offset.item(), "total": total.item()}
    return total, terms
