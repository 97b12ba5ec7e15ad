"""Identity-sequence deepfake detection.

Thin Python layer over the C++ core. Reports and configs cross the boundary
as JSON text and are decoded to plain dicts here.
"""

import json

from . import _idseq
from ._idseq import (
    Checkpoint,
    ExtractionError,
    FormatError,
    InputError,
    TrainingError,
    ValidationError,
    adc,
    anchor_positive_loss,
    auc,
    classification_loss,
    corrupt,
    difference_sequence,
    make_synthetic,
    serialize_manifest,
    tdc,
    total_loss,
    triplet_loss,
)

__version__ = "0.1.0"


def default_train_config():
    return json.loads(_idseq.default_train_config())


def train(manifest, out, config=None, overrides=(), cache_dir="", on_epoch=None):
    """Train on cached embeddings; writes best.ckpt and last.ckpt into `out`.

    `config` is a dict in the same layout as the JSON config files; missing
    keys keep their defaults. Returns the per-epoch metrics.
    """
    text = json.dumps(config) if config is not None else ""
    return _idseq.train(str(manifest), str(out), text, list(overrides), str(cache_dir), on_epoch)


def evaluate(checkpoint, manifest, split="TEST", cache_dir="", workers=1):
    """Score a split and return the report as a dict."""
    text = _idseq.evaluate(str(checkpoint), str(manifest), split, str(cache_dir), workers)
    return json.loads(text)


def render_report(report, fmt="markdown", method="Ours"):
    return _idseq.render_report(json.dumps(report), fmt, method)


__all__ = [
    "Checkpoint",
    "ExtractionError",
    "FormatError",
    "InputError",
    "TrainingError",
    "ValidationError",
    "adc",
    "anchor_positive_loss",
    "auc",
    "classification_loss",
    "corrupt",
    "default_train_config",
    "difference_sequence",
    "evaluate",
    "make_synthetic",
    "render_report",
    "serialize_manifest",
    "tdc",
    "total_loss",
    "train",
    "triplet_loss",
]
