# smotecls/services/manifest.py
from __future__ import annotations

import json
import logging
import os
import platform
import time
import uuid
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

from smotecls import __version__
from smotecls.core.errors import DataError

logger = logging.getLogger("smotecls.manifest")

MANIFEST_SUFFIX = ".manifest.json"


@dataclass
class RunManifest:
    """
    What a command ran with: argv, resolved settings, seed, version, input
    digests and timing. `argv` is enough to replay the run.
    """

    command: str
    argv: List[str]
    settings: Dict[str, Any]
    seed: int
    version: str = __version__
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    inputs: Dict[str, str] = field(default_factory=dict)  # path -> sha256
    outputs: List[str] = field(default_factory=list)
    notes: Dict[str, Any] = field(default_factory=dict)
    started_at: float = field(default_factory=time.time)
    elapsed_s: float = 0.0
    python: str = field(default_factory=platform.python_version)

    def finish(self) -> "RunManifest":
        self.elapsed_s = round(time.time() - self.started_at, 3)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def manifest_path(out_path: str) -> str:
    root, _ = os.path.splitext(out_path)
    return root + MANIFEST_SUFFIX


def write_manifest(manifest: RunManifest, path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.info("MANIFEST %s command=%s run=%s", path, manifest.command, manifest.run_id)


def read_manifest(path: str) -> RunManifest:
    if not os.path.exists(path):
        raise DataError(f"manifest not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise DataError(f"manifest is not valid JSON: {e}")
    missing = [k for k in ("command", "argv", "settings", "seed") if k not in raw]
    if missing:
        raise DataError(f"manifest missing keys: {', '.join(missing)}")
    known = set(RunManifest.__dataclass_fields__)
    return RunManifest(**{k: v for k, v in raw.items() if k in known})


def check_inputs(manifest: RunManifest, digest) -> Optional[str]:
    """First input whose current digest differs from the recorded one, else None."""
    for path, recorded in manifest.inputs.items():
        if not os.path.exists(path) or digest(path) != recorded:
            return path
    return None
