"""Canonical JSON views of configuration objects and their hashes."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from enum import Enum

import numpy as np


def to_plain(obj):
    """Recursively convert configs to JSON-compatible builtins.

    Objects with an ``as_dict`` method use it; other dataclasses are
    expanded field by field.
    """
    if hasattr(obj, "as_dict") and not isinstance(obj, type):
        return to_plain(obj.as_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON rendering (sorted keys, no whitespace)."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
