from __future__ import annotations

import numpy as np
from scipy import stats

from .errors import UsageError
from .nn_core import forward


def evaluate(model, features, labels) -> tuple[float, float]:
    """(accuracy, error_rate) of argmax predictions."""
    y = np.asarray(labels)
    if len(y) == 0:
        raise UsageError("cannot evaluate on an empty split")
    pred = forward(model, features).argmax(axis=1)
    acc = float(np.mean(pred == y))
    return acc, 1.0 - acc


def evaluate_domain(model, domain) -> tuple[float, float]:
    return evaluate(model, domain.eval_x, domain.eval_y)


def summarize(values) -> dict:
    """Mean, sample SD and Student-t 95% half-width; SD/CI are None for one value."""
    v = np.asarray(values, dtype=np.float64)
    out = {"mean": float(v.mean()), "sd": None, "ci95": None, "n": int(v.size)}
    if v.size > 1:
        sd = float(v.std(ddof=1))
        out["sd"] = sd
        out["ci95"] = float(stats.t.ppf(0.975, v.size - 1) * sd / np.sqrt(v.size))
    return out
