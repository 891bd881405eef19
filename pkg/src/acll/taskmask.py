"""Per-weight ownership bookkeeping for prune-and-freeze lifelong learning.

``owner[i] == 0`` marks a free weight, ``owner[i] == k`` a weight claimed
by task ``k``.  Once set, an owner never changes.  Per-task binary masks are
derived views of this vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTaskError, OwnershipViolationError, SequencingError, ShapeError

__all__ = ["OwnershipMap", "new_ownership", "register_task", "view_for_task",
           "trainable_mask", "assign_retained"]


@dataclass
class OwnershipMap:
    owner: np.ndarray
    n_tasks: int = 0
    heads: dict[int, tuple[int, int]] = field(default_factory=dict)

    def head_indicator(self) -> np.ndarray:
        """Boolean vector marking every head entry of every task."""
        ind = np.zeros(self.owner.size, dtype=bool)
        for lo, hi in self.heads.values():
            ind[lo:hi] = True
        return ind

    def copy(self) -> OwnershipMap:
        return OwnershipMap(self.owner.copy(), self.n_tasks, dict(self.heads))

    def to_dict(self) -> dict:
        return {"owner": self.owner.tolist(), "n_tasks": self.n_tasks,
                "heads": {str(k): list(v) for k, v in sorted(self.heads.items())}}

    @classmethod
    def from_dict(cls, data: dict) -> OwnershipMap:
        return cls(np.asarray(data["owner"], dtype=np.int64), int(data["n_tasks"]),
                   {int(k): (int(v[0]), int(v[1])) for k, v in data["heads"].items()})


def new_ownership(n_weights: int) -> OwnershipMap:
    return OwnershipMap(np.zeros(n_weights, dtype=np.int64))


def register_task(ownership: OwnershipMap, head_range: tuple[int, int] | None = None) -> int:
    """Open a new task and hand it the head entries in ``head_range``.

    ``head_range`` is a half-open index interval; when it lies past the end of
    the owner vector the vector is extended (heads are appended to the
    network's weight vector when they are created).
    """
    task_id = ownership.n_tasks + 1
    if head_range is not None:
        lo, hi = head_range
        if hi > ownership.owner.size:
            ownership.owner = np.concatenate(
                [ownership.owner, np.zeros(hi - ownership.owner.size, dtype=np.int64)])
        if np.any(ownership.owner[lo:hi] != 0):
            raise OwnershipViolationError("head range overlaps owned weights")
        ownership.owner[lo:hi] = task_id
        ownership.heads[task_id] = (lo, hi)
    ownership.n_tasks = task_id
    return task_id


def _foreign_heads(ownership: OwnershipMap, task_id: int) -> np.ndarray:
    ind = np.zeros(ownership.owner.size, dtype=bool)
    for k, (lo, hi) in ownership.heads.items():
        if k != task_id:
            ind[lo:hi] = True
    return ind


def view_for_task(ownership: OwnershipMap, task_id: int) -> np.ndarray:
    """Inference mask of ``task_id``: weights owned by tasks ``1..task_id``.

    Heads of other tasks are excluded.

    Examples
    --------
    >>> m = OwnershipMap(np.array([1, 0, 2, 1]), n_tasks=2)
    >>> view_for_task(m, 1).tolist()
    [1, 0, 0, 1]
    """
    if not 1 <= task_id <= ownership.n_tasks:
        raise InvalidTaskError(f"task {task_id} not in 1..{ownership.n_tasks}")
    o = ownership.owner
    mask = (o >= 1) & (o <= task_id) & ~_foreign_heads(ownership, task_id)
    return mask.astype(np.int8)


def trainable_mask(ownership: OwnershipMap, task_id: int) -> np.ndarray:
    """Free weights plus the head of ``task_id``, which must be the newest task."""
    if task_id != ownership.n_tasks:
        raise SequencingError(f"only the newest task ({ownership.n_tasks}) may train, "
                              f"got {task_id}")
    mask = ownership.owner == 0
    if task_id in ownership.heads:
        lo, hi = ownership.heads[task_id]
        mask[lo:hi] = True
    return mask.astype(np.int8)


def assign_retained(ownership: OwnershipMap, retained, task_id: int) -> OwnershipMap:
    """Hand every retained free weight to ``task_id``; returns a new map."""
    retained = np.asarray(retained).astype(bool)
    if retained.shape != ownership.owner.shape:
        raise ShapeError("retained mask does not match the owner vector")
    if not 1 <= task_id <= ownership.n_tasks:
        raise InvalidTaskError(f"task {task_id} not in 1..{ownership.n_tasks}")
    clash = retained & (ownership.owner != 0)
    if np.any(clash):
        raise OwnershipViolationError(
            f"retained mask claims {int(clash.sum())} weight(s) already owned, "
            f"first at index {int(np.flatnonzero(clash)[0])}")
    out = ownership.copy()
    out.owner[retained] = task_id
    return out
