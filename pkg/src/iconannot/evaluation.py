"""Icon annotation metrics.

F1 uses center matching: a detection is a true positive when its center
falls inside a not-yet-matched ground-truth box of the same class, taking
detections in descending score order. Every detection, matched or not,
counts toward precision. mAP uses IOU matching instead.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import ICON_CLASSES, Detection, IconAnnotation, IconClass, VHNode, box_iou, match_leaf

STANDARD = "standard"
STARRED = "starred"


@dataclass(frozen=True)
class MatchResult:
    """``det_match[i]``: annotation index matched by detection i, or None (FP).
    ``ann_match[j]``: detection index matching annotation j, or None (missed)."""

    det_match: tuple[Optional[int], ...]
    ann_match: tuple[Optional[int], ...]

    @property
    def tp(self) -> int:
        return sum(m is not None for m in self.det_match)

    @property
    def fp(self) -> int:
        return sum(m is None for m in self.det_match)


def _det_order(detections: Sequence[Detection]) -> list[int]:
    return sorted(
        range(len(detections)),
        key=lambda i: (-detections[i].score, detections[i].bbox.as_tuple(), detections[i].label.index),
    )


def match(
    detections: Sequence[Detection],
    annotations: Sequence[IconAnnotation],
    class_aware: bool = True,
) -> MatchResult:
    """Greedy center matching, highest confidence first.

    When a center falls inside several free boxes the one whose center is
    closest wins (ties: lower index).
    """
    det_match: list[Optional[int]] = [None] * len(detections)
    ann_match: list[Optional[int]] = [None] * len(annotations)
    for i in _det_order(detections):
        d = detections[i]
        cx, cy = d.bbox.center
        best, best_dist = None, None
        for j, a in enumerate(annotations):
            if ann_match[j] is not None or (class_aware and a.label is not d.label):
                continue
            if not a.bbox.contains(cx, cy):
                continue
            ax, ay = a.bbox.center
            dist = (ax - cx) ** 2 + (ay - cy) ** 2
            if best is None or dist < best_dist:
                best, best_dist = j, dist
        if best is not None:
            det_match[i] = best
            ann_match[best] = i
    return MatchResult(tuple(det_match), tuple(ann_match))


def _safe_div(a: float, b: float) -> float:
    return a / b if b else 0.0


def f1_score(p: float, r: float) -> float:
    return _safe_div(2 * p * r, p + r)


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    mode: str = STANDARD
    per_class: dict[str, ClassMetrics] = field(default_factory=dict)
    map_01: Optional[float] = None
    map_05: Optional[float] = None
    undefined: list[str] = field(default_factory=list)  # metrics that hit 0/0

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "mAP@0.1IOU": self.map_01,
            "mAP@0.5IOU": self.map_05,
            "undefined": list(self.undefined),
            "per_class": {k: vars(v) for k, v in self.per_class.items()},
        }


def micro_metrics(
    results: Iterable[tuple[MatchResult, Sequence[IconAnnotation], Sequence[Detection]]],
    mode: str = STANDARD,
) -> MetricsReport:
    """Micro precision / recall / F1 over a corpus.

    In starred mode only annotations with ``vh_matched`` form the recall
    ground truth (numerator and denominator); precision is unchanged.
    """
    if mode not in (STANDARD, STARRED):
        raise ValueError(f"unknown mode {mode!r}")
    tp_c = {c: 0 for c in ICON_CLASSES}
    fp_c = {c: 0 for c in ICON_CLASSES}
    rec_tp_c = {c: 0 for c in ICON_CLASSES}
    gt_c = {c: 0 for c in ICON_CLASSES}
    for res, anns, dets in results:
        for i, m in enumerate(res.det_match):
            if m is None:
                fp_c[dets[i].label] += 1
            else:
                tp_c[dets[i].label] += 1
        for j, a in enumerate(anns):
            if mode == STARRED and not a.vh_matched:
                continue
            gt_c[a.label] += 1
            if res.ann_match[j] is not None:
                rec_tp_c[a.label] += 1
    tp, fp = sum(tp_c.values()), sum(fp_c.values())
    rec_tp, gt = sum(rec_tp_c.values()), sum(gt_c.values())
    undefined = [name for name, den in (("precision", tp + fp), ("recall", gt)) if den == 0]
    p, r = _safe_div(tp, tp + fp), _safe_div(rec_tp, gt)
    if p + r == 0:
        undefined.append("f1")
    per_class = {}
    for c in ICON_CLASSES:
        cp, cr = _safe_div(tp_c[c], tp_c[c] + fp_c[c]), _safe_div(rec_tp_c[c], gt_c[c])
        per_class[c.value] = ClassMetrics(cp, cr, f1_score(cp, cr), tp_c[c], fp_c[c], gt_c[c] - rec_tp_c[c])
    return MetricsReport(p, r, f1_score(p, r), tp, fp, gt - rec_tp, mode, per_class, undefined=undefined)


def average_precision(scores: Sequence[float], is_tp: Sequence[bool], n_gt: int) -> float:
    """All-point interpolated AP: area under the monotone precision envelope."""
    if n_gt == 0:
        return 0.0
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    tp = np.asarray(is_tp, dtype=np.float64)[order]
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    recall = np.concatenate([[0.0], ctp / n_gt])
    precision = np.concatenate([[1.0], ctp / np.maximum(ctp + cfp, 1e-300)])
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return float(np.sum((recall[1:] - recall[:-1]) * envelope[1:]))


def mean_average_precision(
    detections: Sequence[Sequence[Detection]],
    annotations: Sequence[Sequence[IconAnnotation]],
    iou_threshold: float,
) -> float:
    """mAP over classes that occur in the ground truth.

    Inputs are per-image lists. Within each class detections are taken in
    descending score; each claims the free same-image box of highest IOU
    when that IOU reaches the threshold.
    """
    if len(detections) != len(annotations):
        raise ValueError("detections and annotations must cover the same images")
    aps = []
    for cls in ICON_CLASSES:
        n_gt = sum(a.label is cls for anns in annotations for a in anns)
        if n_gt == 0:
            continue
        entries = []  # (score, bbox tuple, image, detection)
        for img, dets in enumerate(detections):
            for d in dets:
                if d.label is cls:
                    entries.append((d.score, d.bbox.as_tuple(), img, d))
        entries.sort(key=lambda e: (-e[0], e[1], e[2]))
        taken: set[tuple[int, int]] = set()
        scores, flags = [], []
        for score, box, img, _ in entries:
            best, best_iou = None, iou_threshold
            for j, a in enumerate(annotations[img]):
                if a.label is not cls or (img, j) in taken:
                    continue
                v = box_iou(box, a.bbox.as_tuple())
                if v >= best_iou and (best is None or v > best_iou):
                    best, best_iou = j, v
            if best is not None:
                taken.add((img, best))
            scores.append(score)
            flags.append(best is not None)
        aps.append(average_precision(scores, flags, n_gt))
    return float(np.mean(aps)) if aps else 0.0


def default_vh_matcher(annotations: Sequence[IconAnnotation], vh_leaves: Sequence[VHNode], min_iou: float = 0.5) -> list[IconAnnotation]:
    """Set ``vh_matched`` iff some leaf overlaps the icon with IOU >= ``min_iou``."""
    return [replace(a, vh_matched=match_leaf(a.bbox, vh_leaves, min_iou) is not None) for a in annotations]


def evaluate(
    detections: Sequence[Sequence[Detection]],
    annotations: Sequence[Sequence[IconAnnotation]],
    mode: str = STANDARD,
    threshold: float = 0.2,
    class_aware: bool = True,
    map_threshold: Optional[float] = None,
) -> MetricsReport:
    """Full report for per-image detections.

    F1 uses detections scoring at least ``threshold``; mAP uses all of them
    unless ``map_threshold`` is given.
    """
    if len(detections) != len(annotations):
        raise ValueError("detections and annotations must cover the same images")
    kept = [[d for d in dets if d.score >= threshold] for dets in detections]
    report = micro_metrics(
        ((match(k, a, class_aware), a, k) for k, a in zip(kept, annotations)),
        mode,
    )
    map_dets = detections if map_threshold is None else [[d for d in ds if d.score >= map_threshold] for ds in detections]
    report.map_01 = mean_average_precision(map_dets, annotations, 0.1)
    report.map_05 = mean_average_precision(map_dets, annotations, 0.5)
    return report


# --------------------------------------------------------------------------
# Rendering


def render_table(reports: dict[str, MetricsReport]) -> str:
    """Rows of P / R / F1 / mAP per model."""
    name_w = max([len("Models")] + [len(k) + 1 for k in reports])  # room for "*"
    head = f"{'Models':<{name_w}} | Precision | Recall |   F1  | mAP@0.1IOU | mAP@0.5IOU"
    lines = [head, "-" * len(head)]
    for name, r in reports.items():
        label = name + ("*" if r.mode == STARRED and not name.endswith("*") else "")
        m1 = "    -     " if r.map_01 is None else f"{r.map_01:10.3f}"
        m5 = "    -     " if r.map_05 is None else f"{r.map_05:10.3f}"
        lines.append(f"{label:<{name_w}} | {r.precision:9.3f} | {r.recall:6.3f} | {r.f1:5.3f} | {m1} | {m5}")
    return "\n".join(lines)


def per_class_csv(reports: dict[str, MetricsReport], train_counts: dict[str, int]) -> str:
    """class, training count, then one F1 column per model."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "train_count", *[f"f1_{k}" for k in reports]])
    for c in ICON_CLASSES:
        w.writerow([c.value, train_counts.get(c.value, 0), *[f"{r.per_class[c.value].f1:.6f}" for r in reports.values()]])
    return buf.getvalue()


def report_json(report: MetricsReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)


def class_f1(report: MetricsReport, classes: Iterable[IconClass]) -> float:
    """Micro F1 restricted to a subset of classes."""
    classes = list(classes)
    tp = sum(report.per_class[c.value].tp for c in classes)
    fp = sum(report.per_class[c.value].fp for c in classes)
    fn = sum(report.per_class[c.value].fn for c in classes)
    return f1_score(_safe_div(tp, tp + fp), _safe_div(tp, tp + fn))
