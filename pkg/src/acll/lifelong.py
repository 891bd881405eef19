"""Sequential-task controller and its baselines.

For every task: register a head, train the free weights, measure the
uncompressed validation risk, choose a pruning fraction (depending on the
strategy), prune, fine-tune what the task keeps, and freeze it.

Strategies
----------
``acll``
    Pruning fraction chosen by :func:`acll.dual.acll_select` under a risk
    tolerance ``epsilon``.
``fixed``
    Constant pruning fraction ``rate`` of the remaining free weights.
``finetune``
    No pruning and no freezing; one network is simply trained task after
    task.
``independent``
    A fresh network per task.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .boopt import BoBudget, EvalCache
from .compressor import CompressionParams, prune, size_of
from .datagen import TaskData
from .dual import DualSearchConfig, acll_select
from .errors import InvalidSpecError
from .net import Network, TrainConfig, add_head, derive_seed, init_network, predict_labels, sgd_train
from .risk import zero_one_risk
from .taskmask import (OwnershipMap, assign_retained, new_ownership, register_task,
                       trainable_mask, view_for_task)

__all__ = ["Strategy", "TaskSpec", "TaskRecord", "SequenceReport", "train_task", "run_sequence",
           "evaluate_all", "make_task_specs", "DEFAULT_LAYER_DIMS"]

DEFAULT_LAYER_DIMS = (2, 64, 64)
STRATEGY_KINDS = ("acll", "fixed", "finetune", "independent")


@dataclass(frozen=True)
class Strategy:
    kind: str
    epsilon: float | None = None
    rate: float | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise InvalidSpecError(f"unknown strategy {self.kind!r}")
        if self.kind == "acll" and (self.epsilon is None or self.epsilon < 0):
            raise InvalidSpecError("acll needs epsilon >= 0")
        if self.kind == "fixed" and (self.rate is None or not 0 <= self.rate <= 1):
            raise InvalidSpecError("fixed needs a rate in [0, 1]")

    @classmethod
    def acll(cls, epsilon: float = 0.02) -> Strategy:
        return cls("acll", epsilon=epsilon)

    @classmethod
    def fixed(cls, rate: float) -> Strategy:
        return cls("fixed", rate=rate)

    @property
    def uses_masks(self) -> bool:
        return self.kind in ("acll", "fixed")

    @property
    def label(self) -> str:
        if self.kind == "acll":
            return f"acll_eps{self.epsilon:g}"
        if self.kind == "fixed":
            return f"fixed_{self.rate:g}"
        return self.kind


@dataclass(frozen=True)
class TaskSpec:
    name: str
    data: TaskData
    train_cfg: TrainConfig
    finetune_cfg: TrainConfig


@dataclass
class TaskRecord:
    task_id: int
    name: str
    theta: tuple[float, ...]
    size: float
    reference_risk: float
    val_risk: float
    acc_post_task: float
    acc_end_of_sequence: float | None = None
    lambda_final: float | None = None
    infeasible: bool = False
    converged: bool | None = None
    n_evaluations: int = 0
    pruned_count: int = 0
    retained_count: int = 0
    trail: list[dict] = field(default_factory=list)
    cache: EvalCache | None = field(default=None, repr=False)
    test_predictions_post: np.ndarray | None = field(default=None, repr=False)
    test_predictions_end: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id, "name": self.name, "theta": list(self.theta),
            "size": self.size, "reference_risk": self.reference_risk,
            "val_risk": self.val_risk, "acc_post_task": self.acc_post_task,
            "acc_end_of_sequence": self.acc_end_of_sequence,
            "lambda_final": self.lambda_final, "infeasible": self.infeasible,
            "converged": self.converged, "n_evaluations": self.n_evaluations,
            "pruned_count": self.pruned_count, "retained_count": self.retained_count,
            "trail": self.trail,
        }


@dataclass
class SequenceReport:
    strategy: str
    seed: int
    layer_dims: list[int]
    tasks: list[TaskRecord]
    owned_fraction: list[float]
    total_evaluations: int

    @property
    def average_end_accuracy(self) -> float:
        return float(np.mean([t.acc_end_of_sequence for t in self.tasks]))

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy, "seed": self.seed, "layer_dims": self.layer_dims,
            "tasks": [t.to_dict() for t in self.tasks],
            "owned_fraction": self.owned_fraction,
            "total_evaluations": self.total_evaluations,
            "avg_over_tasks": self.average_end_accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _accuracy(net: Network, mask, task_id: int, split) -> tuple[float, np.ndarray]:
    pred = predict_labels(net, mask, task_id, split.inputs)
    return float(np.mean(pred == split.labels)), pred


def _eval_mask(net: Network, ownership: OwnershipMap, task_id: int, strategy: Strategy):
    if strategy.uses_masks:
        return view_for_task(ownership, task_id)
    return np.ones(net.weights.size, dtype=np.int8)


def _prune_and_finetune(net: Network, ownership: OwnershipMap, task_id: int, theta,
                        task: TaskSpec):
    """Prune a copy of ``net`` and fine-tune the weights the task keeps."""
    cand = net.copy()
    params = CompressionParams.of(theta, net.n_layers)
    retained, pruned = prune(cand, ownership, task_id, params)
    trainable = retained.copy()
    lo, hi = ownership.heads[task_id]
    trainable[lo:hi] = 1
    sgd_train(cand, trainable, task_id, task.data.train, task.finetune_cfg)
    return cand, retained, pruned


def reinit_free(net: Network, ownership: OwnershipMap, task_id: int) -> None:
    """Redraw the free trunk weights before a later task trains them.

    Freed weights were zeroed by pruning; left at zero behind frozen biases
    many rectifier units start dead.
    """
    rng = np.random.default_rng(derive_seed(net.seed, task_id, 7))
    free = ownership.owner[:net.n_trunk] == 0
    for w, _, fan_in, _ in net.layer_slices():
        idx = np.arange(w.start, w.stop)[free[w]]
        net.weights[idx] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=idx.size)


def train_task(net: Network, ownership: OwnershipMap, task: TaskSpec, strategy: Strategy,
               dual_cfg: DualSearchConfig | None = None, seed: int = 0):
    """Run one task of the sequence; returns ``(net, ownership, record)``.

    ``net`` and ``ownership`` are updated in place and also returned.  For
    ``independent`` the caller passes a fresh network.
    """
    task_id = ownership.n_tasks + 1
    head = add_head(net, task_id, task.data.class_count)
    register_task(ownership, head)
    if strategy.uses_masks and task_id > 1:
        reinit_free(net, ownership, task_id)

    sgd_train(net, trainable_mask(ownership, task_id), task_id, task.data.train, task.train_cfg)
    ones = np.ones(net.weights.size, dtype=np.int8)
    reference = zero_one_risk(net, ones, task_id, task.data.val).risk

    record = TaskRecord(task_id, task.name, (0.0,), 0.0, reference, reference, 0.0)
    if strategy.uses_masks:
        shared = net.shared_mask()
        if strategy.kind == "acll":
            cfg = dual_cfg or DualSearchConfig()
            cfg = DualSearchConfig(strategy.epsilon, cfg.lambda_lo, cfg.lambda_hi, cfg.lambda_tol,
                                   cfg.max_rounds, cfg.lambda_floor, cfg.refine_steps,
                                   BoBudget(cfg.bo_budget.n_init, cfg.bo_budget.n_iter,
                                            derive_seed(seed, task_id, 3), cfg.bo_budget.ei_tol))

            def evaluate(theta):
                cand, retained, _ = _prune_and_finetune(net, ownership, task_id, theta, task)
                risk = zero_one_risk(cand, ones, task_id, task.data.val).risk
                return size_of(retained, shared), risk

            cache = EvalCache()
            result = acll_select(evaluate, reference, cfg, cache)
            theta = result.theta
            record.lambda_final = result.lambda_final
            record.infeasible = result.infeasible
            record.converged = result.converged
            record.n_evaluations = result.n_evaluations
            record.trail = [asdict(r) | {"theta": list(r.theta)} for r in result.state.trail]
            record.cache = cache
        else:
            theta = (float(strategy.rate),)

        pruned_net, retained, pruned = _prune_and_finetune(net, ownership, task_id, theta, task)
        net.weights = pruned_net.weights
        new_owner = assign_retained(ownership, retained, task_id)
        ownership.owner = new_owner.owner
        record.theta = tuple(float(t) for t in theta)
        record.size = size_of(retained, shared)
        record.pruned_count = pruned
        record.retained_count = int(np.count_nonzero(np.asarray(retained, bool) & shared))
        record.val_risk = zero_one_risk(net, view_for_task(ownership, task_id), task_id,
                                        task.data.val).risk

    acc, pred = _accuracy(net, _eval_mask(net, ownership, task_id, strategy), task_id,
                          task.data.test)
    record.acc_post_task = acc
    record.test_predictions_post = pred
    return net, ownership, record


def evaluate_all(net: Network, ownership: OwnershipMap, tasks: list[TaskSpec],
                 strategy: Strategy = Strategy.fixed(0.5)) -> list[float]:
    """Test accuracy of every task under its own inference mask."""
    return [_accuracy(net, _eval_mask(net, ownership, k, strategy), k, t.data.test)[0]
            for k, t in enumerate(tasks, start=1)]


def _owned_fraction(net: Network, ownership: OwnershipMap) -> float:
    shared = net.shared_mask()
    return np.count_nonzero((ownership.owner != 0) & shared) / np.count_nonzero(shared)


def run_sequence(tasks: list[TaskSpec], strategy: Strategy, seed: int = 0,
                 layer_dims=DEFAULT_LAYER_DIMS,
                 dual_cfg: DualSearchConfig | None = None) -> SequenceReport:
    """Train ``tasks`` in order on one network (one per task for ``independent``)."""
    if not tasks:
        raise InvalidSpecError("need at least one task")
    records = []
    owned = []
    finals = []
    net = init_network(layer_dims, seed)
    ownership = new_ownership(net.weights.size)
    for k, task in enumerate(tasks, start=1):
        try:
            rec, net, ownership = _run_one(net, ownership, task, k, strategy, seed, layer_dims,
                                           dual_cfg, finals)
        except Exception as exc:
            exc.task_name = task.name
            raise
        records.append(rec)
        owned.append(_owned_fraction(net, ownership))

    for k, (rec, task) in enumerate(zip(records, tasks), start=1):
        if strategy.kind == "independent":
            n, o, tid = finals[k - 1]
        else:
            n, o, tid = net, ownership, k
        acc, pred = _accuracy(n, _eval_mask(n, o, tid, strategy), tid, task.data.test)
        rec.acc_end_of_sequence = acc
        rec.test_predictions_end = pred
    return SequenceReport(strategy.label, seed, list(layer_dims), records, owned,
                          sum(r.n_evaluations for r in records))


def _run_one(net, ownership, task, k, strategy, seed, layer_dims, dual_cfg, finals):
    if strategy.kind == "independent":
        net = init_network(layer_dims, derive_seed(seed, k))
        ownership = new_ownership(net.weights.size)
        # a fresh network numbers its only task 1
        _, _, rec = train_task(net, ownership, task, strategy, dual_cfg, seed)
        rec.task_id = k
        finals.append((net, ownership, 1))
    else:
        _, _, rec = train_task(net, ownership, task, strategy, dual_cfg, seed)
    return rec, net, ownership


def make_task_specs(datasets, seed: int = 0, train_cfg: TrainConfig | None = None,
                    finetune_cfg: TrainConfig | None = None) -> list[TaskSpec]:
    """Attach per-task training schedules (seeds derived from ``seed``)."""
    train_cfg = train_cfg or TrainConfig(epochs=60)
    finetune_cfg = finetune_cfg or TrainConfig(epochs=20)
    specs = []
    for k, (name, data) in enumerate(datasets, start=1):
        specs.append(TaskSpec(name, data, train_cfg.with_seed(derive_seed(seed, k, 1)),
                              finetune_cfg.with_seed(derive_seed(seed, k, 2))))
    return specs
