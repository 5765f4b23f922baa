# smotecls/core/checkpoint.py
from __future__ import annotations

import logging
import os
import pickle
from typing import Any

from smotecls import __version__
from smotecls.core.errors import DataError

logger = logging.getLogger("smotecls.checkpoint")

FORMAT_TAG = "smotecls-model"
FORMAT_VERSION = 1


def save_model(model: Any, path: str, kind: str) -> None:
    """Write a fitted model (CvaeModel, ForestModel, ...) in a versioned envelope."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    envelope = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "library": __version__,
        "kind": kind,
        "model": model,
    }
    with open(path, "wb") as fh:
        pickle.dump(envelope, fh, protocol=pickle.HIGHEST_PROTOCOL)
    logger.info("CHECKPOINT saved kind=%s -> %s", kind, path)


def load_model(path: str, kind: str | None = None) -> Any:
    if not os.path.exists(path):
        raise DataError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        try:
            envelope = pickle.load(fh)
        except Exception as e:
            raise DataError(f"unreadable checkpoint {path}: {e}")
    if not isinstance(envelope, dict) or envelope.get("format") != FORMAT_TAG:
        raise DataError(f"{path} is not a {FORMAT_TAG} file")
    if envelope.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {envelope.get('version')}")
    if kind is not None and envelope.get("kind") != kind:
        raise DataError(f"checkpoint holds {envelope.get('kind')!r}, expected {kind!r}")
    return envelope["model"]
