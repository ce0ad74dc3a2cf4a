"""Single-file model checkpoints.

The file is a numpy ``.npz`` archive holding one array per named parameter
tensor (``param/<name>``) plus a UTF-8 JSON header under ``__header__``::

    {"format_version": 1, "model_type": "detector-vh", "config": {...}, "extra": {...}}

No pickled objects are stored, so loading never executes code.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch

FORMAT_VERSION = 1
_HEADER = "__header__"
_PREFIX = "param/"


class CheckpointError(ValueError):
    """Unreadable, corrupt, or incompatible checkpoint file."""


@dataclass
class Checkpoint:
    model_type: str
    config: dict
    state: dict[str, torch.Tensor]
    extra: dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: Path | str, ckpt: Checkpoint) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "model_type": ckpt.model_type,
        "config": ckpt.config,
        "extra": ckpt.extra,
    }
    arrays = {_HEADER: np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)}
    for name, t in ckpt.state.items():
        arrays[_PREFIX + name] = t.detach().cpu().numpy()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(path)


def load_checkpoint(path: Path | str) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        with np.load(path, allow_pickle=False) as z:
            if _HEADER not in z.files:
                raise CheckpointError(f"{path}: missing header")
            header = json.loads(z[_HEADER].tobytes().decode("utf-8"))
            state = {k[len(_PREFIX):]: torch.from_numpy(z[k].copy()) for k in z.files if k.startswith(_PREFIX)}
    except CheckpointError:
        raise
    except (OSError, ValueError, zipfile.BadZipFile, UnicodeDecodeError, EOFError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format_version {version!r}")
    try:
        return Checkpoint(header["model_type"], header["config"], state, header.get("extra", {}))
    except KeyError as exc:
        raise CheckpointError(f"{path}: header lacks {exc}") from exc
