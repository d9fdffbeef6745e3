"""Versioned, checksummed JSON persistence for trained models."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Union

from .errors import ChecksumMismatch, IoError, SchemaVersionMismatch
from .hmm import HmmBank
from .knn import KnnModel

__all__ = ["FORMAT_VERSION", "save_model", "load_model"]

FORMAT_VERSION = 1

_KINDS = {KnnModel: "knn", HmmBank: "hmm_bank"}
_LOADERS = {"knn": KnnModel.from_dict, "hmm_bank": HmmBank.from_dict}

Model = Union[KnnModel, HmmBank]


def _payload_checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_model(model: Model, path) -> None:
    kind = _KINDS.get(type(model))
    if kind is None:
        raise IoError(f"cannot persist object of type {type(model).__name__}")
    payload = model.to_dict()
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "checksum": _payload_checksum(payload),
        "payload": payload,
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> Model:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoError(f"{path}: not valid JSON: {exc}") from exc
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: format_version {version!r} unsupported (expected {FORMAT_VERSION})"
        )
    kind = doc.get("kind")
    if kind not in _LOADERS:
        raise IoError(f"{path}: unknown model kind {kind!r}")
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise IoError(f"{path}: missing model payload")
    if _payload_checksum(payload) != doc.get("checksum"):
        raise ChecksumMismatch(f"{path}: payload does not match its checksum")
    return _LOADERS[kind](payload)
