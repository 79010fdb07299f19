"""Hard pseudo-labels, per-batch relabelling and the low-confidence filter."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .nn_core import forward, softmax


@dataclass(frozen=True)
class LabeledBatch:
    indices: np.ndarray
    labels: np.ndarray
    confidences: np.ndarray
    source: str  # "ground_truth" or "pseudo"

    def __len__(self):
        return len(self.indices)


def hard_label(model, features):
    """Argmax labels and their softmax probability.  Ties go to the lowest class."""
    probs = softmax(forward(model, features))
    labels = probs.argmax(axis=1)
    return labels, probs[np.arange(len(probs)), labels]


def label_batch_dynamic(model, domain, batch) -> LabeledBatch:
    """Label ``domain.x[batch]`` with the model as it is right now.

    A labelled (source) domain returns its ground truth at confidence 1.
    """
    idx = np.asarray(batch, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= len(domain)):
        raise UsageError(f"batch index out of range for domain of size {len(domain)}")
    if domain.labeled:
        return LabeledBatch(idx, domain.y[idx].copy(), np.ones(len(idx)), "ground_truth")
    labels, conf = hard_label(model, domain.x[idx])
    return LabeledBatch(idx, labels, conf, "pseudo")


def confidence_filter(batch: LabeledBatch, drop_fraction: float) -> LabeledBatch:
    """Drop the ``floor(drop_fraction * N)`` least confident samples, keeping order."""
    if not 0.0 <= drop_fraction < 1.0:
        raise UsageError(f"drop_fraction must lie in [0, 1), got {drop_fraction}")
    n = len(batch)
    n_drop = int(np.floor(drop_fraction * n))
    if n_drop == 0:
        return batch
    # stable sort: among equal confidences the lower original position goes first
    dropped = np.argsort(batch.confidences, kind="stable")[:n_drop]
    keep = np.ones(n, dtype=bool)
    keep[dropped] = False
    return LabeledBatch(batch.indices[keep], batch.labels[keep], batch.confidences[keep], batch.source)
