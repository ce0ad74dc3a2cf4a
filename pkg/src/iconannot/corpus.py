"""Domain types and on-disk corpus handling.

A corpus directory looks like::

    corpus/
      screens/<id>.png        screenshot, RGB
      vh/<id>.json            view hierarchy (Rico-style JSON tree)
      annotations.jsonl       one {"id", "icons": [...]} record per screen

Geometry is always normalized to the screen (root node) extent.
"""

from __future__ import annotations

import enum
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Raised for unreadable or malformed corpus files."""


class IconClass(enum.Enum):
    STAR = "star"
    ARROW_BACKWARD = "arrow backward"
    ARROW_FORWARD = "arrow forward"
    MORE = "more"
    MENU = "menu"
    SEARCH = "search"
    CLOSE = "close"
    ADD = "add"
    EXPAND_MORE = "expand more"
    PLAY = "play"
    CHECK = "check"
    SHARE = "share"
    CHAT = "chat"
    SETTINGS = "settings"
    INFO = "info"
    HOME = "home"
    REFRESH = "refresh"
    TIME = "time"
    EMOJI = "emoji"
    EDIT = "edit"
    NOTIFICATIONS = "notifications"
    CALL = "call"
    PAUSE = "pause"
    SEND = "send"
    DELETE = "delete"
    VIDEO_CAM = "video cam"
    LAUNCH = "launch"
    END_CALL = "end call"
    TAKE_PHOTO = "take photo"
    # Only produced by the candidate classifier.
    OTHER = "OTHER"

    @classmethod
    def parse(cls, name: str) -> "IconClass":
        """Accept "arrow backward", "arrow_backward" or "ARROW_BACKWARD"."""
        key = name.strip()
        try:
            return cls(key.replace("_", " ").lower() if key != "OTHER" else key)
        except ValueError:
            pass
        try:
            return cls[key.upper().replace(" ", "_")]
        except KeyError:
            raise CorpusError(f"unknown icon class {name!r}") from None

    @property
    def index(self) -> int:
        return _CLASS_INDEX[self]


# Detector channel order; OTHER is the 30th classifier output.
ICON_CLASSES: tuple[IconClass, ...] = tuple(c for c in IconClass if c is not IconClass.OTHER)
ALL_CLASSES: tuple[IconClass, ...] = ICON_CLASSES + (IconClass.OTHER,)
_CLASS_INDEX = {c: i for i, c in enumerate(ALL_CLASSES)}
NUM_ICON_CLASSES = len(ICON_CLASSES)


@dataclass(frozen=True)
class BoundingBox:
    """Normalized (x_min, y_min, x_max, y_max), origin at the top-left."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x_min < self.x_max <= 1.0 and 0.0 <= self.y_min < self.y_max <= 1.0):
            raise ValueError(f"invalid normalized box {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def iou(self, other: "BoundingBox") -> float:
        return box_iou(self.as_tuple(), other.as_tuple())

    @classmethod
    def from_pixels(cls, bounds: Sequence[int], root: Sequence[int]) -> "BoundingBox":
        left, top, right, bottom = root
        w, h = right - left, bottom - top
        return cls(
            (bounds[0] - left) / w,
            (bounds[1] - top) / h,
            (bounds[2] - left) / w,
            (bounds[3] - top) / h,
        )

    def to_pixels(self, root: Sequence[int]) -> tuple[int, int, int, int]:
        left, top, right, bottom = root
        w, h = right - left, bottom - top
        return (
            int(round(self.x_min * w)) + left,
            int(round(self.y_min * h)) + top,
            int(round(self.x_max * w)) + left,
            int(round(self.y_max * h)) + top,
        )


def box_iou(a: Sequence[float], b: Sequence[float]) -> float:
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class VHNode:
    class_name: str
    resource_id: Optional[str]
    bounds: BoundingBox

    def __post_init__(self) -> None:
        if not self.class_name:
            raise ValueError("VHNode.class_name must be non-empty")


@dataclass(frozen=True)
class IconAnnotation:
    bbox: BoundingBox
    label: IconClass
    vh_matched: bool = False

    def __post_init__(self) -> None:
        if self.label is IconClass.OTHER:
            raise ValueError("annotations cannot carry the OTHER label")

    def to_json(self) -> dict:
        return {"bbox": list(self.bbox.as_tuple()), "label": self.label.value, "vh_matched": self.vh_matched}

    @classmethod
    def from_json(cls, obj: dict) -> "IconAnnotation":
        return cls(BoundingBox(*map(float, obj["bbox"])), IconClass.parse(obj["label"]), bool(obj.get("vh_matched", False)))


@dataclass(frozen=True, eq=False)
class UISample:
    """One screen: pixels (H x W x 3 uint8), VH leaves, icon annotations.

    ``root_bounds`` is the pixel extent of the VH root, needed to map
    normalized boxes back to VH pixel coordinates. ``warnings`` collects
    non-fatal loader findings (clamped or dropped nodes) and is ignored by
    equality.
    """

    id: str
    pixels: np.ndarray
    vh_leaves: tuple[VHNode, ...] = ()
    annotations: tuple[IconAnnotation, ...] = ()
    root_bounds: Optional[tuple[int, int, int, int]] = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] == 0 or px.shape[1] == 0:
            raise ValueError(f"pixels must be H x W x 3 with positive size, got {px.shape}")
        if px.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        object.__setattr__(self, "vh_leaves", tuple(self.vh_leaves))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if self.root_bounds is None:
            object.__setattr__(self, "root_bounds", (0, 0, px.shape[1], px.shape[0]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UISample):
            return NotImplemented
        return (
            self.id == other.id
            and self.pixels.shape == other.pixels.shape
            and bool(np.array_equal(self.pixels, other.pixels))
            and self.vh_leaves == other.vh_leaves
            and self.annotations == other.annotations
            and self.root_bounds == other.root_bounds
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def image_size(self) -> tuple[int, int]:
        """(height, width) of the screenshot."""
        return self.pixels.shape[0], self.pixels.shape[1]


@dataclass(frozen=True)
class Detection:
    bbox: BoundingBox
    label: IconClass
    score: float

    def __post_init__(self) -> None:
        if self.label is IconClass.OTHER:
            raise ValueError("detections cannot carry the OTHER label")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")

    def to_json(self) -> dict:
        return {"bbox": list(self.bbox.as_tuple()), "label": self.label.value, "score": self.score}

    @classmethod
    def from_json(cls, obj: dict) -> "Detection":
        return cls(BoundingBox(*map(float, obj["bbox"])), IconClass.parse(obj["label"]), float(obj["score"]))


def match_leaf(box: BoundingBox, leaves: Sequence[VHNode], min_iou: float = 0.5) -> Optional[int]:
    """Index of the leaf overlapping ``box`` best, if its IOU reaches ``min_iou``."""
    best, best_iou = None, min_iou
    for i, leaf in enumerate(leaves):
        v = box.iou(leaf.bounds)
        if v >= best_iou and (best is None or v > best_iou):
            best, best_iou = i, v
    return best


# --------------------------------------------------------------------------
# View hierarchy parsing


def _read_json(path: Path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise CorpusError(f"{path}: {exc.strerror or exc}") from exc


def _vh_root(doc) -> dict:
    # Rico dumps wrap the tree as {"activity": {"root": ...}}.
    if isinstance(doc, dict) and isinstance(doc.get("activity"), dict) and "root" in doc["activity"]:
        doc = doc["activity"]["root"]
    if not isinstance(doc, dict):
        raise CorpusError("view hierarchy root must be a JSON object")
    return doc


def iter_leaves(node: dict) -> Iterator[dict]:
    """Depth-first, pre-order leaf nodes (no or empty ``children``)."""
    stack = [node]
    while stack:
        cur = stack.pop()
        children = [c for c in (cur.get("children") or []) if isinstance(c, dict)]
        if not children:
            yield cur
        else:
            stack.extend(reversed(children))


def parse_view_hierarchy(doc, source: str = "<vh>") -> tuple[list[VHNode], tuple[int, int, int, int], list[str]]:
    """Extract leaves from a VH JSON document.

    Returns (leaves, root_bounds, warnings). Out-of-root bounds are clamped;
    boxes that are empty after clamping are dropped.
    """
    root = _vh_root(doc)
    try:
        rb = tuple(int(v) for v in root["bounds"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"{source}: root node lacks integer 'bounds'") from exc
    if len(rb) != 4 or rb[2] <= rb[0] or rb[3] <= rb[1]:
        raise CorpusError(f"{source}: degenerate root bounds {rb}")
    leaves: list[VHNode] = []
    warnings: list[str] = []
    for k, node in enumerate(iter_leaves(root)):
        raw = node.get("bounds")
        if raw is None:
            warnings.append(f"{source}: leaf {k} has no bounds, skipped")
            continue
        try:
            b = [int(v) for v in raw]
        except (TypeError, ValueError):
            raise CorpusError(f"{source}: leaf {k} has non-integer bounds {raw!r}") from None
        if len(b) != 4:
            raise CorpusError(f"{source}: leaf {k} bounds must have 4 entries")
        clamped = [
            min(max(b[0], rb[0]), rb[2]),
            min(max(b[1], rb[1]), rb[3]),
            min(max(b[2], rb[0]), rb[2]),
            min(max(b[3], rb[1]), rb[3]),
        ]
        if clamped != b:
            warnings.append(f"{source}: leaf {k} bounds {b} clamped to root {list(rb)}")
        if clamped[2] <= clamped[0] or clamped[3] <= clamped[1]:
            warnings.append(f"{source}: leaf {k} has a degenerate box {clamped}, dropped")
            continue
        rid = node.get("resource-id")
        leaves.append(
            VHNode(
                class_name=str(node.get("class") or "android.view.View"),
                resource_id=str(rid) if rid else None,
                bounds=BoundingBox.from_pixels(clamped, rb),
            )
        )
    return leaves, rb, warnings  # type: ignore[return-value]


def vh_to_json(sample: UISample) -> dict:
    """Flat VH tree: the root with every leaf as a direct child."""
    rb = sample.root_bounds
    children = []
    for leaf in sample.vh_leaves:
        node = {"class": leaf.class_name, "bounds": list(leaf.bounds.to_pixels(rb))}
        if leaf.resource_id is not None:
            node["resource-id"] = leaf.resource_id
        children.append(node)
    return {"class": "android.widget.FrameLayout", "bounds": list(rb), "children": children}


# --------------------------------------------------------------------------
# Samples and corpora


def read_annotations(path: Path) -> dict[str, list[IconAnnotation]]:
    out: dict[str, list[IconAnnotation]] = {}
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    out[str(rec["id"])] = [IconAnnotation.from_json(o) for o in rec.get("icons", [])]
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CorpusError(f"{path}:{lineno}: bad annotation record ({exc})") from exc
    except OSError as exc:
        raise CorpusError(f"{path}: {exc.strerror or exc}") from exc
    return out


def annotation_record(sample_id: str, annotations: Iterable[IconAnnotation]) -> str:
    return json.dumps({"id": sample_id, "icons": [a.to_json() for a in annotations]}, sort_keys=True)


def read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except OSError as exc:
        raise CorpusError(f"{path}: unreadable image ({exc})") from exc


def load_sample(
    screenshot_path: Path | str,
    vh_path: Path | str,
    ann_path: Path | str | None = None,
    annotations: Optional[dict[str, list[IconAnnotation]]] = None,
) -> UISample:
    """Load one screen. The sample id is the screenshot file stem.

    ``annotations`` may be a pre-read id -> icons map to avoid re-reading a
    large JSONL file for every screen.
    """
    screenshot_path, vh_path = Path(screenshot_path), Path(vh_path)
    sample_id = screenshot_path.stem
    pixels = read_image(screenshot_path)
    leaves, rb, warnings = parse_view_hierarchy(_read_json(vh_path), source=str(vh_path))
    if annotations is None and ann_path is not None:
        annotations = read_annotations(Path(ann_path))
    icons = (annotations or {}).get(sample_id, [])
    for w in warnings:
        log.debug(w)
    return UISample(sample_id, pixels, tuple(leaves), tuple(icons), rb, tuple(warnings))


def save_sample(sample: UISample, corpus_dir: Path | str) -> None:
    """Write screenshot and VH; annotations go through :func:`save_corpus`."""
    corpus_dir = Path(corpus_dir)
    (corpus_dir / "screens").mkdir(parents=True, exist_ok=True)
    (corpus_dir / "vh").mkdir(parents=True, exist_ok=True)
    Image.fromarray(sample.pixels).save(corpus_dir / "screens" / f"{sample.id}.png", optimize=False)
    with open(corpus_dir / "vh" / f"{sample.id}.json", "w", encoding="utf-8") as f:
        json.dump(vh_to_json(sample), f, sort_keys=True)


def save_corpus(samples: Iterable[UISample], corpus_dir: Path | str) -> None:
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    with open(corpus_dir / "annotations.jsonl", "w", encoding="utf-8") as ann:
        for s in samples:
            save_sample(s, corpus_dir)
            ann.write(annotation_record(s.id, s.annotations) + "\n")


def corpus_ids(corpus_dir: Path | str) -> list[str]:
    screens = Path(corpus_dir) / "screens"
    if not screens.is_dir():
        raise CorpusError(f"{corpus_dir}: not a corpus directory (missing screens/)")
    return sorted(p.stem for p in screens.glob("*.png"))


def load_corpus(corpus_dir: Path | str, ids: Optional[Sequence[str]] = None) -> list[UISample]:
    corpus_dir = Path(corpus_dir)
    ann_path = corpus_dir / "annotations.jsonl"
    annotations = read_annotations(ann_path) if ann_path.exists() else {}
    ids = corpus_ids(corpus_dir) if ids is None else ids
    return [
        load_sample(corpus_dir / "screens" / f"{i}.png", corpus_dir / "vh" / f"{i}.json", annotations=annotations)
        for i in ids
    ]


# --------------------------------------------------------------------------
# Statistics


@dataclass
class CorpusStats:
    class_counts: dict[IconClass, int]
    icons_per_sample: Counter  # icon count -> number of samples
    n_samples: int = 0

    @property
    def total(self) -> int:
        return sum(self.class_counts.values())

    def to_json(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "total_icons": self.total,
            "class_counts": {c.value: n for c, n in self.class_counts.items()},
            "icons_per_sample": {str(k): v for k, v in sorted(self.icons_per_sample.items())},
        }

    def table(self) -> str:
        rows = sorted(self.class_counts.items(), key=lambda kv: (-kv[1], kv[0].index))
        width = max(len(c.value) for c in ICON_CLASSES)
        lines = [f"{'Class':<{width}}  {'Num':>7}", "-" * (width + 9)]
        lines += [f"{c.value:<{width}}  {n:>7,}" for c, n in rows]
        lines.append(f"{'total':<{width}}  {self.total:>7,}")
        return "\n".join(lines)


def corpus_stats(samples: Iterable[UISample]) -> CorpusStats:
    counts = {c: 0 for c in ICON_CLASSES}
    hist: Counter = Counter()
    n = 0
    for s in samples:
        n += 1
        hist[len(s.annotations)] += 1
        for a in s.annotations:
            counts[a.label] += 1
    return CorpusStats(counts, hist, n)
