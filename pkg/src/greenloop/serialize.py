"""Canonical JSON helpers.

All persisted artifacts go through canonical_dumps so identical inputs
produce identical bytes: sorted keys, fixed separators, repr-exact floats,
trailing newline.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def write_json(path: Path | str, obj: Any) -> None:
    Path(path).write_text(canonical_dumps(obj), encoding="utf-8")


def read_json(path: Path | str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def content_hash(obj: Any) -> str:
    """Stable 16-hex-digit digest of a JSON-serializable value."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
