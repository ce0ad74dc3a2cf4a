"""Procedural UI screens with icons, distractors and a noisy view hierarchy.

Pixels and icon annotations depend only on the seed and the layout
settings. Resource-id presence, dropped icon nodes and spurious nodes each
draw from their own random stream, so two corpora that differ only in
``p_rid``, ``p_drop_node`` or ``p_extra_node`` share identical screenshots.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from PIL import Image, ImageDraw

from . import seeding
from .corpus import (
    ICON_CLASSES,
    BoundingBox,
    IconAnnotation,
    IconClass,
    UISample,
    VHNode,
    annotation_record,
    save_sample,
)

C = IconClass

DEFAULT_CLASSES: tuple[IconClass, ...] = (
    C.STAR, C.ARROW_BACKWARD, C.ARROW_FORWARD, C.MORE, C.MENU,
    C.SEARCH, C.CLOSE, C.ADD, C.SHARE, C.DELETE,
)  # fmt: skip

# Resource-id tails per class, most frequent first.
RID_KEYWORDS: dict[IconClass, tuple[str, ...]] = {
    C.STAR: ("star", "btn_favorite", "rating_star", "iv_star", "bookmark_star"),
    C.ARROW_BACKWARD: ("back", "btn_back", "navigate_up", "iv_back", "back_arrow"),
    C.ARROW_FORWARD: ("next", "btn_next", "arrow_right", "iv_forward", "go_next"),
    C.MORE: ("more", "overflow_menu", "btn_more", "iv_more_options", "more_vert"),
    C.MENU: ("menu", "drawer_toggle", "btn_menu", "hamburger", "nav_menu"),
    C.SEARCH: ("search", "search_button", "action_search", "iv_search", "searchIcon"),
    C.CLOSE: ("close", "btn_close", "dismiss", "closeButton", "iv_close"),
    C.ADD: ("add", "fab_add", "btn_add", "addItem", "new_entry"),
    C.EXPAND_MORE: ("expand", "expand_more", "dropdown_arrow", "iv_expand", "chevron_down"),
    C.PLAY: ("play", "btn_play", "play_pause", "playButton", "iv_play"),
    C.CHECK: ("check", "done", "btn_confirm", "checkmark", "iv_done"),
    C.SHARE: ("share", "share_btn", "action_share", "iv_share", "shareButton"),
    C.CHAT: ("chat", "message", "btn_chat", "comments", "iv_message"),
    C.SETTINGS: ("settings", "action_settings", "btn_settings", "preferences", "gear"),
    C.INFO: ("info", "btn_info", "about", "iv_info", "details"),
    C.HOME: ("home", "btn_home", "nav_home", "iv_home", "homeButton"),
    C.REFRESH: ("refresh", "reload", "btn_refresh", "sync", "iv_refresh"),
    C.TIME: ("time", "clock", "iv_time", "duration", "timer"),
    C.EMOJI: ("emoji", "emoticon", "btn_emoji", "smiley", "iv_emoji"),
    C.EDIT: ("edit", "btn_edit", "action_edit", "pencil", "iv_edit"),
    C.NOTIFICATIONS: ("notifications", "bell", "btn_notify", "alerts", "iv_notification"),
    C.CALL: ("call", "phone", "btn_call", "dial", "iv_phone"),
    C.PAUSE: ("pause", "btn_pause", "iv_pause", "pauseButton", "media_pause"),
    C.SEND: ("send", "btn_send", "send_message", "iv_send", "submit"),
    C.DELETE: ("delete", "btn_delete", "remove_item", "trash", "iv_delete"),
    C.VIDEO_CAM: ("video", "camera_video", "btn_video", "video_call", "iv_video"),
    C.LAUNCH: ("launch", "open_external", "btn_open", "open_in_new", "iv_launch"),
    C.END_CALL: ("end_call", "hang_up", "btn_hangup", "call_end", "iv_end_call"),
    C.TAKE_PHOTO: ("take_photo", "camera", "btn_capture", "shutter", "iv_camera"),
}
_RID_WEIGHTS = np.array([0.4, 0.25, 0.15, 0.12, 0.08])

TEXT_RIDS = ("title", "subtitle", "tv_name", "description", "label", "tv_date")
FLAG_RIDS = ("logo", "flag", "iv_logo", "brand_logo", "country_flag")
PHOTO_RIDS = ("thumbnail", "photo", "iv_cover", "avatar", "image")
ICON_VIEW_CLASSES = (
    "android.widget.ImageView",
    "android.widget.ImageButton",
    "android.support.v7.widget.AppCompatImageButton",
    "android.support.v7.widget.AppCompatImageView",
)
APP_PACKAGES = ("com.example.notes", "com.sololearn.python", "org.demo.music", "com.shop.app", "net.news.reader")


@dataclass(frozen=True)
class GenConfig:
    n_samples: int = 100
    canvas_h: int = 192
    canvas_w: int = 384
    classes: tuple[IconClass, ...] = DEFAULT_CLASSES
    icons_per_screen: tuple[int, int] = (3, 8)
    icon_size: tuple[int, int] = (14, 26)
    p_rid: float = 0.7
    p_drop_node: float = 0.0
    p_extra_node: float = 0.1
    ambiguous_pairs: tuple[tuple[IconClass, IconClass], ...] = ((C.CLOSE, C.DELETE),)
    n_text_lines: tuple[int, int] = (2, 6)
    n_flags: tuple[int, int] = (0, 2)
    n_photos: tuple[int, int] = (0, 2)
    vh_scale: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_rid", "p_drop_node", "p_extra_node"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.canvas_h < 64 or self.canvas_w < 64:
            raise ValueError("canvas must be at least 64 x 64")
        classes = tuple(IconClass.parse(c) if isinstance(c, str) else c for c in self.classes)
        if not classes or IconClass.OTHER in classes:
            raise ValueError("classes must be a non-empty subset of the icon classes")
        pairs = tuple(
            tuple(IconClass.parse(c) if isinstance(c, str) else c for c in pair) for pair in self.ambiguous_pairs
        )
        for a, b in pairs:
            if a not in classes or b not in classes:
                raise ValueError(f"ambiguous pair ({a.value}, {b.value}) uses classes outside {self.classes}")
        lo, hi = self.icons_per_screen
        if not 0 <= lo <= hi:
            raise ValueError("icons_per_screen must be an ordered (min, max) pair")
        if self.n_samples < 0 or self.vh_scale < 1:
            raise ValueError("n_samples must be >= 0 and vh_scale >= 1")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "ambiguous_pairs", pairs)

    def glyph_of(self, cls: IconClass) -> IconClass:
        for a, b in self.ambiguous_pairs:
            if cls is b:
                return a
        return cls

    def to_json(self) -> dict:
        d = asdict(self)
        d["classes"] = [c.value for c in self.classes]
        d["ambiguous_pairs"] = [[a.value, b.value] for a, b in self.ambiguous_pairs]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "GenConfig":
        obj = dict(obj)
        if "classes" in obj:
            obj["classes"] = tuple(IconClass.parse(c) for c in obj["classes"])
        if "ambiguous_pairs" in obj:
            obj["ambiguous_pairs"] = tuple(tuple(IconClass.parse(c) for c in p) for p in obj["ambiguous_pairs"])
        for k in ("icons_per_screen", "icon_size", "n_text_lines", "n_flags", "n_photos"):
            if k in obj:
                obj[k] = tuple(obj[k])
        return cls(**obj)


# --------------------------------------------------------------------------
# Glyphs, drawn into a box in a unit coordinate frame


class _Pen:
    def __init__(self, draw: ImageDraw.ImageDraw, box: tuple[float, float, float, float], fg, bg):
        self.d = draw
        self.x0, self.y0, x1, y1 = box
        self.w, self.h = x1 - self.x0, y1 - self.y0
        self.fg, self.bg = fg, bg
        self.lw = max(1, int(round(0.13 * min(self.w, self.h))))

    def p(self, u: float, v: float) -> tuple[float, float]:
        return (self.x0 + u * self.w, self.y0 + v * self.h)

    def line(self, *pts, width: Optional[int] = None) -> None:
        self.d.line([self.p(*q) for q in pts], fill=self.fg, width=width or self.lw, joint="curve")

    def poly(self, *pts, fill=None) -> None:
        self.d.polygon([self.p(*q) for q in pts], fill=fill or self.fg)

    def _rect(self, u0, v0, u1, v1):
        (a, b), (c, d) = self.p(u0, v0), self.p(u1, v1)
        return [a, b, c, d]

    def circle(self, u: float, v: float, r: float, fill=None, outline: bool = False) -> None:
        box = self._rect(u - r, v - r, u + r, v + r)
        if outline:
            self.d.ellipse(box, outline=self.fg, width=self.lw)
        else:
            self.d.ellipse(box, fill=fill or self.fg)

    def rect(self, u0, v0, u1, v1, outline: bool = False, fill=None) -> None:
        box = self._rect(u0, v0, u1, v1)
        if outline:
            self.d.rectangle(box, outline=self.fg, width=self.lw)
        else:
            self.d.rectangle(box, fill=fill or self.fg)

    def arc(self, u0, v0, u1, v1, start: float, end: float, width: Optional[int] = None) -> None:
        self.d.arc(self._rect(u0, v0, u1, v1), start, end, fill=self.fg, width=width or self.lw)


def _star(g: _Pen) -> None:
    pts = []
    for k in range(10):
        r = 0.45 if k % 2 == 0 else 0.19
        a = -math.pi / 2 + k * math.pi / 5
        pts.append((0.5 + r * math.cos(a), 0.53 + r * math.sin(a)))
    g.poly(*pts)


def _arrow(g: _Pen, forward: bool) -> None:
    s = (lambda u: 1 - u) if forward else (lambda u: u)
    g.line((s(0.85), 0.5), (s(0.15), 0.5))
    g.line((s(0.45), 0.18), (s(0.15), 0.5), (s(0.45), 0.82))


def _settings(g: _Pen) -> None:
    g.circle(0.5, 0.5, 0.2, outline=True)
    for k in range(8):
        a = k * math.pi / 4
        g.line((0.5 + 0.28 * math.cos(a), 0.5 + 0.28 * math.sin(a)), (0.5 + 0.44 * math.cos(a), 0.5 + 0.44 * math.sin(a)))


def _refresh(g: _Pen) -> None:
    g.arc(0.18, 0.18, 0.82, 0.82, 40, 330)
    g.poly((0.62, 0.12), (0.92, 0.22), (0.7, 0.42))


def _take_photo(g: _Pen) -> None:
    g.rect(0.1, 0.3, 0.9, 0.82)
    g.rect(0.35, 0.18, 0.65, 0.3)
    g.circle(0.5, 0.56, 0.17, fill=g.bg)


GLYPHS = {
    C.STAR: _star,
    C.ARROW_BACKWARD: lambda g: _arrow(g, forward=False),
    C.ARROW_FORWARD: lambda g: _arrow(g, forward=True),
    C.MORE: lambda g: [g.circle(0.5, v, 0.1) for v in (0.2, 0.5, 0.8)],
    C.MENU: lambda g: [g.line((0.15, v), (0.85, v)) for v in (0.25, 0.5, 0.75)],
    C.SEARCH: lambda g: (g.circle(0.42, 0.42, 0.26, outline=True), g.line((0.6, 0.6), (0.88, 0.88))),
    C.CLOSE: lambda g: (g.line((0.2, 0.2), (0.8, 0.8)), g.line((0.8, 0.2), (0.2, 0.8))),
    C.ADD: lambda g: (g.line((0.5, 0.15), (0.5, 0.85)), g.line((0.15, 0.5), (0.85, 0.5))),
    C.EXPAND_MORE: lambda g: g.line((0.18, 0.35), (0.5, 0.67), (0.82, 0.35)),
    C.PLAY: lambda g: g.poly((0.25, 0.15), (0.85, 0.5), (0.25, 0.85)),
    C.CHECK: lambda g: g.line((0.15, 0.55), (0.4, 0.8), (0.88, 0.25)),
    C.SHARE: lambda g: (
        g.line((0.75, 0.2), (0.25, 0.5), (0.75, 0.8)),
        [g.circle(u, v, 0.13) for u, v in ((0.75, 0.2), (0.25, 0.5), (0.75, 0.8))],
    ),
    C.CHAT: lambda g: (g.rect(0.12, 0.15, 0.88, 0.68, outline=True), g.poly((0.25, 0.66), (0.25, 0.9), (0.48, 0.66))),
    C.SETTINGS: _settings,
    C.INFO: lambda g: (g.circle(0.5, 0.5, 0.42, outline=True), g.circle(0.5, 0.3, 0.07), g.line((0.5, 0.45), (0.5, 0.75))),
    C.HOME: lambda g: (g.line((0.1, 0.52), (0.5, 0.14), (0.9, 0.52)), g.rect(0.24, 0.5, 0.76, 0.88, outline=True)),
    C.REFRESH: _refresh,
    C.TIME: lambda g: (g.circle(0.5, 0.5, 0.42, outline=True), g.line((0.5, 0.22), (0.5, 0.5), (0.72, 0.58))),
    C.EMOJI: lambda g: (
        g.circle(0.5, 0.5, 0.42, outline=True),
        g.circle(0.36, 0.4, 0.06),
        g.circle(0.64, 0.4, 0.06),
        g.arc(0.3, 0.35, 0.7, 0.72, 20, 160),
    ),
    C.EDIT: lambda g: (g.line((0.22, 0.78), (0.78, 0.22), width=2 * g.lw), g.poly((0.1, 0.9), (0.16, 0.7), (0.3, 0.84))),
    C.NOTIFICATIONS: lambda g: (
        g.poly((0.3, 0.7), (0.3, 0.4), (0.4, 0.22), (0.6, 0.22), (0.7, 0.4), (0.7, 0.7), (0.84, 0.78), (0.16, 0.78)),
        g.circle(0.5, 0.88, 0.08),
    ),
    C.CALL: lambda g: (g.arc(0.15, 0.15, 0.85, 0.85, 100, 190, width=2 * g.lw), g.circle(0.22, 0.4, 0.1), g.circle(0.42, 0.8, 0.1)),
    C.PAUSE: lambda g: (g.rect(0.25, 0.18, 0.42, 0.82), g.rect(0.58, 0.18, 0.75, 0.82)),
    C.SEND: lambda g: g.poly((0.1, 0.15), (0.9, 0.5), (0.1, 0.85), (0.26, 0.5)),
    C.DELETE: lambda g: (g.rect(0.27, 0.3, 0.73, 0.88, outline=True), g.line((0.15, 0.25), (0.85, 0.25)), g.rect(0.4, 0.12, 0.6, 0.25)),
    C.VIDEO_CAM: lambda g: (g.rect(0.08, 0.3, 0.62, 0.7), g.poly((0.62, 0.5), (0.92, 0.28), (0.92, 0.72))),
    C.LAUNCH: lambda g: (
        g.line((0.4, 0.2), (0.15, 0.2), (0.15, 0.85), (0.8, 0.85), (0.8, 0.6)),
        g.line((0.45, 0.55), (0.85, 0.15)),
        g.line((0.58, 0.15), (0.85, 0.15), (0.85, 0.42)),
    ),
    C.END_CALL: lambda g: (g.arc(0.08, 0.3, 0.92, 1.1, 200, 340, width=2 * g.lw), g.rect(0.08, 0.5, 0.26, 0.66), g.rect(0.74, 0.5, 0.92, 0.66)),
    C.TAKE_PHOTO: _take_photo,
}
assert set(GLYPHS) == set(ICON_CLASSES)


def draw_glyph(draw: ImageDraw.ImageDraw, cls: IconClass, box, fg, bg) -> None:
    GLYPHS[cls](_Pen(draw, box, fg, bg))


# --------------------------------------------------------------------------
# Screen layout

_SS = 2  # supersampling factor for anti-aliased strokes


@dataclass
class _Element:
    kind: str  # icon | text | flag | photo | extra
    box: tuple[int, int, int, int]  # screenshot pixels, exclusive right/bottom
    label: Optional[IconClass] = None


@dataclass
class GenManifest:
    config: dict
    samples: list[dict] = field(default_factory=list)
    class_counts: dict[str, int] = field(default_factory=dict)
    rid_counts: dict[str, dict[str, int]] = field(default_factory=dict)
    rid_keywords: dict[str, list[str]] = field(default_factory=dict)
    icon_nodes: int = 0
    icon_nodes_with_rid: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def _place(rng: np.random.Generator, occupied: list, w: int, h: int, W: int, H: int, top: int = 0, margin: int = 3, avoid_y: Optional[int] = None):
    for _ in range(60):
        x = int(rng.integers(2, max(3, W - w - 2)))
        y = int(rng.integers(top + 2, max(top + 3, H - h - 2)))
        box = (x, y, x + w, y + h)
        if avoid_y is not None and y < avoid_y < y + h:
            continue
        if all(box[2] + margin <= o[0] or o[2] + margin <= box[0] or box[3] + margin <= o[1] or o[3] + margin <= box[1] for o in occupied):
            occupied.append(box)
            return box
    return None


def _contrast(bg) -> tuple[int, int, int]:
    return (40, 40, 48) if _luma(bg) > 128 else (245, 245, 245)


def _luma(c) -> float:
    return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]


def _render(cfg: GenConfig, index: int) -> tuple[np.ndarray, list[_Element]]:
    rng = seeding.rng(cfg.seed, "layout", index)
    H, W = cfg.canvas_h, cfg.canvas_w
    dark = rng.random() < 0.2
    page = tuple(int(v) for v in (rng.integers(20, 60, 3) if dark else rng.integers(225, 256, 3)))
    bar = tuple(int(v) for v in rng.integers(30, 220, 3))
    bar_h = int(round(0.14 * H))
    img = Image.new("RGB", (W * _SS, H * _SS), page)
    d = ImageDraw.Draw(img)
    d.rectangle([0, 0, W * _SS, bar_h * _SS], fill=bar)

    def bg_at(box) -> tuple:
        return bar if box[1] < bar_h else page

    def S(box):
        return [v * _SS for v in box]

    occupied: list = []
    elements: list[_Element] = []
    lo, hi = cfg.icons_per_screen
    for _ in range(int(rng.integers(lo, hi + 1))):
        cls = cfg.classes[int(rng.integers(len(cfg.classes)))]
        s = int(rng.integers(cfg.icon_size[0], cfg.icon_size[1] + 1))
        box = _place(rng, occupied, s, s, W, H, avoid_y=bar_h)
        if box is None:
            continue
        bg = bg_at(box)
        fg = _contrast(bg)
        tint = tuple(int(v) for v in rng.integers(0, 256, 3))
        if rng.random() < 0.4 and abs(_luma(tint) - _luma(bg)) > 100:
            fg = tint
        pad = 0.12 + 0.06 * rng.random()
        inner = [box[0] + pad * s, box[1] + pad * s, box[2] - pad * s, box[3] - pad * s]
        draw_glyph(d, cfg.glyph_of(cls), [v * _SS for v in inner], fg, bg)
        elements.append(_Element("icon", box, cls))

    for _ in range(int(rng.integers(cfg.n_flags[0], cfg.n_flags[1] + 1))):
        w, h = int(rng.integers(24, 38)), int(rng.integers(16, 24))
        box = _place(rng, occupied, w, h, W, H, top=bar_h)
        if box is None:
            continue
        stripes = int(rng.integers(5, 8))
        colors = [(200, 30, 40), (245, 245, 245)] if rng.random() < 0.6 else [tuple(int(v) for v in rng.integers(0, 256, 3)) for _ in range(2)]
        for k in range(stripes):
            y0 = box[1] + k * h / stripes
            d.rectangle(S((box[0], y0, box[2], y0 + h / stripes)), fill=colors[k % 2])
        if rng.random() < 0.7:
            d.rectangle(S((box[0], box[1], box[0] + w * 0.4, box[1] + h * 0.55)), fill=(30, 50, 130))
        elements.append(_Element("flag", box))

    for _ in range(int(rng.integers(cfg.n_photos[0], cfg.n_photos[1] + 1))):
        w, h = int(rng.integers(30, 60)), int(rng.integers(24, 48))
        box = _place(rng, occupied, w, h, W, H, top=bar_h)
        if box is None:
            continue
        c0 = rng.integers(0, 256, 3)
        c1 = rng.integers(0, 256, 3)
        for k in range(8):
            t = k / 7
            col = tuple(int(v) for v in (c0 * (1 - t) + c1 * t))
            d.rectangle(S((box[0], box[1] + k * h / 8, box[2], box[1] + (k + 1) * h / 8)), fill=col)
        elements.append(_Element("photo", box))

    ink = _contrast(page)
    for _ in range(int(rng.integers(cfg.n_text_lines[0], cfg.n_text_lines[1] + 1))):
        n_words = int(rng.integers(2, 7))
        widths = [int(rng.integers(6, 26)) for _ in range(n_words)]
        w = sum(widths) + 4 * (n_words - 1)
        h = int(rng.integers(5, 9))
        box = _place(rng, occupied, min(w, W - 8), h, W, H, top=bar_h)
        if box is None:
            continue
        x = box[0]
        for ww in widths:
            if x + ww > box[2]:
                break
            d.rectangle(S((x, box[1] + 1, x + ww, box[3] - 1)), fill=ink)
            x += ww + 4
        elements.append(_Element("text", box))

    pixels = np.asarray(img.resize((W, H), Image.LANCZOS), dtype=np.uint8).copy()
    return pixels, elements


def _rid(rng: np.random.Generator, tails: tuple[str, ...], package: str, weighted: bool = True) -> str:
    if weighted and len(tails) == len(_RID_WEIGHTS):
        tail = tails[int(rng.choice(len(tails), p=_RID_WEIGHTS))]
    else:
        tail = tails[int(rng.integers(len(tails)))]
    return f"{package}:id/{tail}"


def generate_sample(cfg: GenConfig, index: int) -> tuple[UISample, dict]:
    """One screen and its manifest record."""
    pixels, elements = _render(cfg, index)
    H, W = cfg.canvas_h, cfg.canvas_w
    s = cfg.vh_scale
    root = (0, 0, W * s, H * s)
    rid_rng = seeding.rng(cfg.seed, "rid", index)
    drop_rng = seeding.rng(cfg.seed, "drop", index)
    extra_rng = seeding.rng(cfg.seed, "extra", index)
    package = APP_PACKAGES[int(rid_rng.integers(len(APP_PACKAGES)))]

    leaves: list[VHNode] = []
    annotations: list[IconAnnotation] = []
    rid_flags: list[bool] = []
    icon_rids: list[list[str]] = []  # [class, rid tail] of kept icon nodes with an id
    occupied = [e.box for e in elements]
    for e in elements:
        # Fixed draw order per element keeps each stream independent of the others.
        has_rid = rid_rng.random() < cfg.p_rid
        jitter = rid_rng.integers(-1, 2, 4)
        view_cls = ICON_VIEW_CLASSES[int(rid_rng.integers(len(ICON_VIEW_CLASSES)))]
        if e.kind == "icon":
            rid = _rid(rid_rng, RID_KEYWORDS[e.label], package)
        elif e.kind == "flag":
            rid, view_cls = _rid(rid_rng, FLAG_RIDS, package, weighted=False), "android.widget.ImageView"
        elif e.kind == "photo":
            rid, view_cls = _rid(rid_rng, PHOTO_RIDS, package, weighted=False), "android.widget.ImageView"
        else:
            rid, view_cls = _rid(rid_rng, TEXT_RIDS, package, weighted=False), "android.widget.TextView"
        dropped = e.kind == "icon" and drop_rng.random() < cfg.p_drop_node
        x0, y0, x1, y1 = e.box
        px = [
            min(max((x0 + int(jitter[0])) * s, 0), W * s - 1),
            min(max((y0 + int(jitter[1])) * s, 0), H * s - 1),
            min(max((x1 + int(jitter[2])) * s, 1), W * s),
            min(max((y1 + int(jitter[3])) * s, 1), H * s),
        ]
        if e.kind == "icon":
            annotations.append(IconAnnotation(BoundingBox(x0 / W, y0 / H, x1 / W, y1 / H), e.label, vh_matched=not dropped))
        if dropped:
            continue
        if e.kind == "icon":
            rid_flags.append(has_rid)
            if has_rid:
                icon_rids.append([e.label.value, rid.split(":id/", 1)[1]])
        leaves.append(VHNode(view_cls, rid if has_rid else None, BoundingBox.from_pixels(px, root)))

    n_extra = int((extra_rng.random(len(annotations)) < cfg.p_extra_node).sum())
    for _ in range(n_extra):
        size = int(extra_rng.integers(cfg.icon_size[0], cfg.icon_size[1] + 1))
        box = _place(extra_rng, occupied, size, size, W, H)
        if box is None:
            continue
        cls = cfg.classes[int(extra_rng.integers(len(cfg.classes)))]
        rid = _rid(extra_rng, RID_KEYWORDS[cls], package) if extra_rng.random() < cfg.p_rid else None
        leaves.append(VHNode("android.widget.ImageView", rid, BoundingBox.from_pixels([v * s for v in box], root)))

    sample = UISample(f"screen_{index:06d}", pixels, tuple(leaves), tuple(annotations), root)
    record = {
        "id": sample.id,
        "icons": [a.to_json() for a in annotations],
        "n_vh_leaves": len(leaves),
        "icon_node_has_rid": rid_flags,
        "icon_rids": icon_rids,
    }
    return sample, record


def iter_samples(cfg: GenConfig) -> Iterator[tuple[UISample, dict]]:
    for i in range(cfg.n_samples):
        yield generate_sample(cfg, i)


def generate_samples(cfg: GenConfig) -> list[UISample]:
    return [s for s, _ in iter_samples(cfg)]


def generate(cfg: GenConfig, out_dir: Path | str) -> GenManifest:
    """Write a corpus (screens/, vh/, annotations.jsonl, manifest.json)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = GenManifest(
        config=cfg.to_json(),
        rid_keywords={c.value: list(RID_KEYWORDS[c]) for c in cfg.classes},
    )
    counts: Counter = Counter()
    rid_counts: dict[str, Counter] = {c.value: Counter() for c in ICON_CLASSES}
    with open(out_dir / "annotations.jsonl", "w", encoding="utf-8") as ann:
        for sample, record in iter_samples(cfg):
            save_sample(sample, out_dir)
            ann.write(annotation_record(sample.id, sample.annotations) + "\n")
            manifest.samples.append(record)
            counts.update(a.label for a in sample.annotations)
            manifest.icon_nodes += len(record["icon_node_has_rid"])
            manifest.icon_nodes_with_rid += sum(record["icon_node_has_rid"])
            for cls, tail in record["icon_rids"]:
                rid_counts[cls][tail] += 1
    manifest.class_counts = {c.value: counts.get(c, 0) for c in ICON_CLASSES}
    manifest.rid_counts = {k: dict(sorted(v.items())) for k, v in rid_counts.items()}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest.to_json(), f, sort_keys=True, indent=1)
    return manifest
