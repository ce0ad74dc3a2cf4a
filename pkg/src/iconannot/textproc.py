"""View-hierarchy text features: attribute tails, tokenization, embedding.

The text of a node is the last component of its class name plus the last
component of its resource-id, e.g. ``android.support.AppImageButton`` and
``com.sololearn.python:id/vote_down`` give ``app image button vote down``.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from functools import lru_cache
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from .corpus import ICON_CLASSES, IconClass, UISample, VHNode, match_leaf


class NoSampleAvailable(LookupError):
    """The requested class has no resource-ids to draw from."""


def extract_text_attribute(node: VHNode) -> tuple[str, str]:
    """(class-name tail, resource-id tail); a missing resource-id gives ""."""
    cls_tail = node.class_name.rsplit(".", 1)[-1]
    rid = node.resource_id or ""
    return cls_tail, rid_tail(rid)


def rid_tail(rid: str) -> str:
    if ":id/" in rid:
        return rid.split(":id/", 1)[1]
    return rid.rsplit("/", 1)[-1]


def _split_camel(word: str) -> list[str]:
    # Boundaries: lower/digit -> Upper, and "URLBar" -> "URL" | "Bar".
    parts: list[str] = []
    start = 0
    n = len(word)
    for i in range(1, n):
        prev, cur = word[i - 1], word[i]
        if not cur.isupper():
            continue
        if prev.islower() or prev.isdigit():
            parts.append(word[start:i])
            start = i
        elif prev.isupper() and i + 1 < n and word[i + 1].islower():
            parts.append(word[start:i])
            start = i
    parts.append(word[start:])
    return parts


def tokenize(raw: str) -> list[str]:
    """Split on underscores (and any other non-alphanumeric) and camel case."""
    words: list[str] = []
    cur: list[str] = []
    for ch in raw:
        if ch.isalnum() and ch != "_":
            cur.append(ch)
        elif cur:
            words.append("".join(cur))
            cur = []
    if cur:
        words.append("".join(cur))
    tokens = []
    for w in words:
        for piece in _split_camel(w):
            # lower() can emit combining marks (e.g. "İ"), so re-filter.
            run = ""
            for ch in piece.lower():
                if ch.isalnum() and not ch.isupper():
                    run += ch
                elif run:
                    tokens.append(run)
                    run = ""
            if run:
                tokens.append(run)
    return tokens


def node_tokens(node: VHNode, rid_override: Optional[str] = None) -> list[str]:
    cls_tail, rid = extract_text_attribute(node)
    if rid_override is not None:
        rid = rid_tail(rid_override)
    return tokenize(cls_tail) + tokenize(rid)


class TextEncoder(Protocol):
    dim: int

    def encode(self, tokens: Sequence[str]) -> np.ndarray: ...


class HashedTextEncoder:
    """Mean of per-token unit vectors drawn from a seeded hash of the token.

    Stands in for a pretrained sentence encoder. Equal tokens always map to
    the same direction, so texts sharing words share embedding mass.
    """

    def __init__(self, dim: int = 128, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._token_vec = lru_cache(maxsize=65536)(self._make_token_vec)

    def _make_token_vec(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16, key=str(self.seed).encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        v.setflags(write=False)
        return v

    def token_vector(self, token: str) -> np.ndarray:
        return self._token_vec(token)

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros(self.dim)
        return np.mean([self._token_vec(t) for t in tokens], axis=0)

    def encode_node(self, node: VHNode, rid_override: Optional[str] = None) -> np.ndarray:
        return self.encode(node_tokens(node, rid_override))

    def __repr__(self) -> str:
        return f"HashedTextEncoder(dim={self.dim}, seed={self.seed})"


class ResourceIdDictionary:
    """Per-class resource-id tail counts, for filling in missing ids."""

    def __init__(self, counts: Optional[dict[IconClass, Counter]] = None):
        self.counts: dict[IconClass, Counter] = {c: Counter() for c in ICON_CLASSES}
        for cls, ctr in (counts or {}).items():
            self.counts[cls].update({k: v for k, v in ctr.items() if v > 0})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResourceIdDictionary):
            return NotImplemented
        return self.counts == other.counts

    def __getitem__(self, cls: IconClass) -> Counter:
        return self.counts[cls]

    def add(self, cls: IconClass, rid: str, n: int = 1) -> None:
        self.counts[cls][rid] += n

    def to_json(self) -> dict:
        return {c.value: dict(sorted(ctr.items())) for c, ctr in self.counts.items()}

    @classmethod
    def from_json(cls, obj: dict) -> "ResourceIdDictionary":
        return cls({IconClass.parse(k): Counter({r: int(n) for r, n in v.items()}) for k, v in obj.items()})

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def build_rid_dictionary(samples: Iterable[UISample]) -> ResourceIdDictionary:
    """Collect resource-id tails of VH nodes matched to annotated icons."""
    d = ResourceIdDictionary()
    for s in samples:
        for ann in s.annotations:
            if not ann.vh_matched:
                continue
            k = match_leaf(ann.bbox, s.vh_leaves)
            if k is None:
                continue
            rid = s.vh_leaves[k].resource_id
            if rid:
                d.add(ann.label, rid_tail(rid))
    return d


def sample_rid(dictionary: ResourceIdDictionary, cls: IconClass, rng: np.random.Generator) -> str:
    """Draw a resource-id for ``cls`` proportionally to its observed frequency."""
    ctr = dictionary.counts.get(cls)
    if not ctr:
        raise NoSampleAvailable(f"no resource-ids recorded for {cls.value!r}")
    keys = sorted(ctr)
    weights = np.array([ctr[k] for k in keys], dtype=np.float64)
    return keys[int(rng.choice(len(keys), p=weights / weights.sum()))]
