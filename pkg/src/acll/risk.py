"""0-1 risk on a labelled split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDataError
from .net import Network, predict_labels

__all__ = ["RiskReading", "zero_one_risk"]


@dataclass(frozen=True)
class RiskReading:
    risk: float
    n_samples: int
    task_id: int
    n_errors: int


def zero_one_risk(net: Network, mask, task_id: int, split) -> RiskReading:
    """Fraction of misclassified samples, ``n_errors / n_samples`` exactly."""
    y = np.asarray(split.labels, dtype=np.int64)
    if y.size == 0:
        raise InvalidDataError("empty split")
    _, k = net.heads[task_id]
    if y.min() < 0 or y.max() >= k:
        raise InvalidDataError(f"labels outside [0, {k})")
    wrong = int(np.count_nonzero(predict_labels(net, mask, task_id, split.inputs) != y))
    return RiskReading(wrong / y.size, int(y.size), task_id, wrong)
