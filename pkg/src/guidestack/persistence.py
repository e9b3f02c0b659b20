"""Model archives: self-describing JSON with an explicit format version.

Floats go through Python's repr (the json module's default), which is the
shortest round-tripping decimal form, so a save/load cycle reproduces
predictions bit for bit. Keys are sorted and separators fixed, so the same
model always serializes to the same bytes. Unknown format versions are
rejected outright.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ArchiveError

FORMAT_VERSION = 1


def _registry() -> dict:
    from .learners import DecisionTree, GradientBoosting, LinearModel, RandomForest
    from .refine import RefinedModel
    from .stacking import StackedEnsemble
    from .tuning import VotedModel

    return {
        "tree": DecisionTree,
        "forest": RandomForest,
        "gbm": GradientBoosting,
        "linear": LinearModel,
        "refined": RefinedModel,
        "voted": VotedModel,
        "stacked": StackedEnsemble,
    }


def _kind_of(model) -> str:
    for kind, cls in _registry().items():
        if type(model) is cls:
            return kind
    raise ArchiveError(f"cannot archive model of type {type(model).__name__}")


def model_payload(model) -> dict:
    return {"kind": _kind_of(model), "data": model.to_dict()}


def model_from_payload(payload: dict):
    registry = _registry()
    kind = payload.get("kind")
    if kind not in registry:
        raise ArchiveError(f"unknown model kind {kind!r}")
    return registry[kind].from_dict(payload["data"])


def archive_bytes(model, extra: dict | None = None) -> bytes:
    envelope = {
        "format_version": FORMAT_VERSION,
        "model": model_payload(model),
        "meta": dict(extra or {}),
    }
    return json.dumps(envelope, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_model(model, path: str | Path, extra: dict | None = None) -> None:
    Path(path).write_bytes(archive_bytes(model, extra))


def load_model(path: str | Path):
    """Returns (model, meta dict)."""
    try:
        envelope = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{path}: not a valid archive ({exc})") from exc
    version = envelope.get("format_version")
    if version != FORMAT_VERSION:
        raise ArchiveError(f"{path}: unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    return model_from_payload(envelope["model"]), envelope.get("meta", {})


def sha256_of_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sha256_of_json(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()
