"""Magnitude pruning of the free trunk weights and the size functional."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError, SequencingError
from .net import Network
from .taskmask import OwnershipMap

__all__ = ["CompressionParams", "prune", "size_of"]


@dataclass(frozen=True)
class CompressionParams:
    """Fraction of currently free weights to prune, one entry per group.

    ``granularity="global"`` uses a single fraction for the whole trunk,
    ``"per-layer"`` one fraction per trunk layer.
    """

    theta: tuple[float, ...]
    granularity: str = "global"

    def __post_init__(self):
        theta = tuple(float(t) for t in np.atleast_1d(self.theta))
        object.__setattr__(self, "theta", theta)
        if self.granularity not in ("global", "per-layer"):
            raise InvalidSpecError(f"unknown granularity {self.granularity!r}")
        if self.granularity == "global" and len(theta) != 1:
            raise InvalidSpecError("global granularity takes exactly one fraction")
        if any(not 0.0 <= t <= 1.0 for t in theta):
            raise InvalidSpecError(f"pruning fractions must lie in [0, 1], got {theta}")

    @classmethod
    def of(cls, theta, n_layers: int = 1) -> CompressionParams:
        theta = tuple(np.atleast_1d(np.asarray(theta, dtype=np.float64)).tolist())
        if len(theta) == 1:
            return cls(theta, "global")
        if len(theta) != n_layers:
            raise InvalidSpecError(f"expected 1 or {n_layers} fractions, got {len(theta)}")
        return cls(theta, "per-layer")


def prune(net: Network, ownership: OwnershipMap, task_id: int,
          params: CompressionParams) -> tuple[np.ndarray, int]:
    """Zero the smallest free weights in place and report what stays.

    In every pruning group the ``floor(theta_g * n_g)`` free weights of
    smallest magnitude are set to zero; ties are broken toward the lower flat
    index.  Owned weights are never touched.  The returned ``retained`` mask
    marks the free entries the current task keeps: surviving free weights
    and all free trunk biases.  Heads are owned at registration and are not
    part of it.
    """
    if task_id != ownership.n_tasks:
        raise SequencingError(f"can only prune the newest task ({ownership.n_tasks})")
    groups = net.trunk_groups()
    free = ownership.owner == 0
    if params.granularity == "global":
        group_of = np.where(groups >= 0, 0, -1)
        n_groups = 1
    else:
        group_of = groups
        n_groups = net.n_layers
        if len(params.theta) != n_groups:
            raise InvalidSpecError(f"per-layer pruning needs {n_groups} fractions")

    retained = np.zeros(net.weights.size, dtype=bool)
    pruned = 0
    for g in range(n_groups):
        idx = np.flatnonzero(free & (group_of == g))
        k = math.floor(params.theta[g] * idx.size)
        order = np.argsort(np.abs(net.weights[idx]), kind="stable")
        drop = idx[order[:k]]
        net.weights[drop] = 0.0
        retained[idx[order[k:]]] = True
        pruned += k
    # free biases always stay with the current task
    retained |= free & (groups < 0) & ~ownership.head_indicator()[:free.size]
    return retained.astype(np.int8), pruned


def size_of(retained, shared) -> float:
    """Newly retained prunable weights as a fraction of all prunable weights.

    ``shared`` is the boolean mask of prunable trunk weights
    (``Network.shared_mask()``); biases and heads count in neither the
    numerator nor the denominator.
    """
    shared = np.asarray(shared, dtype=bool)
    kept = np.count_nonzero(np.asarray(retained, dtype=bool) & shared)
    return kept / np.count_nonzero(shared)
