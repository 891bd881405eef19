"""Dense ReLU network stored as one flat weight vector.

The trunk is described by ``layer_dims`` (input dimension followed by the
width of every hidden layer).  Every trunk layer is followed by a rectifier.
Each task owns a private linear head mapping the last hidden layer to its
classes; heads are appended to the end of the weight vector when a task is
registered.

Flat layout, for each trunk layer in order: the ``fan_out x fan_in`` weight
matrix (row major) then the ``fan_out`` bias vector.  Heads use the same
``W`` then ``b`` layout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDataError, InvalidSpecError, ShapeError

__all__ = [
    "Network",
    "TrainConfig",
    "TrainReport",
    "derive_seed",
    "init_network",
    "add_head",
    "forward",
    "loss_and_grad",
    "sgd_train",
    "predict_labels",
    "save_network",
    "load_network",
]


def derive_seed(*keys: int) -> int:
    """Deterministic 63-bit seed derived from a tuple of integers."""
    state = np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys])
    return int(state.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass
class Network:
    layer_dims: list[int]
    weights: np.ndarray
    heads: dict[int, tuple[int, int]] = field(default_factory=dict)
    seed: int = 0
    activation: str = "relu"

    @property
    def n_trunk(self) -> int:
        """Number of trunk parameters (weights and biases, no heads)."""
        return sum((a + 1) * b for a, b in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    def layer_slices(self) -> list[tuple[slice, slice, int, int]]:
        """(weight slice, bias slice, fan_in, fan_out) for every trunk layer."""
        out = []
        pos = 0
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            w = slice(pos, pos + fan_in * fan_out)
            pos += fan_in * fan_out
            b = slice(pos, pos + fan_out)
            pos += fan_out
            out.append((w, b, fan_in, fan_out))
        return out

    def head_slices(self, task_id: int) -> tuple[slice, slice, int]:
        if task_id not in self.heads:
            raise InvalidSpecError(f"no head registered for task {task_id}")
        start, n_classes = self.heads[task_id]
        hidden = self.layer_dims[-1]
        w = slice(start, start + hidden * n_classes)
        b = slice(w.stop, w.stop + n_classes)
        return w, b, n_classes

    def head_range(self, task_id: int) -> tuple[int, int]:
        w, b, _ = self.head_slices(task_id)
        return w.start, b.stop

    def trunk_groups(self) -> np.ndarray:
        """Layer index of every trunk weight, -1 for biases and head entries."""
        groups = np.full(self.weights.size, -1, dtype=np.int64)
        for layer, (w, _, _, _) in enumerate(self.layer_slices()):
            groups[w] = layer
        return groups

    def shared_mask(self) -> np.ndarray:
        """Boolean mask of prunable trunk weights (biases and heads excluded)."""
        return self.trunk_groups() >= 0

    def copy(self) -> Network:
        return Network(list(self.layer_dims), self.weights.copy(), dict(self.heads),
                       self.seed, self.activation)

    def to_dict(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "weights": self.weights.tolist(),
            "heads": {str(k): list(v) for k, v in sorted(self.heads.items())},
            "seed": self.seed,
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Network:
        return cls(
            layer_dims=[int(d) for d in data["layer_dims"]],
            weights=np.asarray(data["weights"], dtype=np.float64),
            heads={int(k): (int(v[0]), int(v[1])) for k, v in data["heads"].items()},
            seed=int(data.get("seed", 0)),
            activation=data.get("activation", "relu"),
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    learning_rate: float = 0.1
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "plain-sgd"
    momentum: float = 0.9

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidSpecError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidSpecError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise InvalidSpecError("batch_size must be >= 1")
        if self.optimizer not in ("plain-sgd", "momentum-sgd"):
            raise InvalidSpecError(f"unknown optimizer {self.optimizer!r}")

    def with_seed(self, seed: int) -> TrainConfig:
        return TrainConfig(self.epochs, self.learning_rate, self.batch_size, seed,
                           self.optimizer, self.momentum)


@dataclass(frozen=True)
class TrainReport:
    initial_loss: float
    final_loss: float
    epochs_run: int


def init_network(layer_dims, seed: int) -> Network:
    """Trunk with weights ~ N(0, 1/fan_in) and zero biases.

    Examples
    --------
    >>> init_network([2, 4, 3], seed=7).weights.size
    27
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise InvalidSpecError(f"layer_dims must have >= 2 positive entries, got {layer_dims}")
    net = Network(dims, np.zeros(0), {}, int(seed))
    rng = np.random.default_rng(net.seed)
    weights = np.zeros(net.n_trunk)
    for w, _, fan_in, fan_out in net.layer_slices():
        weights[w] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=fan_in * fan_out)
    net.weights = weights
    return net


def add_head(net: Network, task_id: int, n_classes: int) -> tuple[int, int]:
    """Append a private output layer for ``task_id``; returns its index range.

    The head is drawn from a generator seeded by ``(net.seed, task_id)`` so a
    head does not depend on the order in which other heads were registered.
    """
    if task_id in net.heads:
        raise InvalidSpecError(f"task {task_id} already has a head")
    if n_classes < 1:
        raise InvalidSpecError("n_classes must be positive")
    hidden = net.layer_dims[-1]
    rng = np.random.default_rng(derive_seed(net.seed, task_id))
    head = np.concatenate([rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden * n_classes),
                           np.zeros(n_classes)])
    start = net.weights.size
    net.weights = np.concatenate([net.weights, head])
    net.heads[task_id] = (start, n_classes)
    return start, net.weights.size


def _check(net: Network, mask, task_id: int, batch) -> tuple[np.ndarray, np.ndarray]:
    mask = np.asarray(mask)
    if mask.shape != net.weights.shape:
        raise ShapeError(f"mask length {mask.size} != weight length {net.weights.size}")
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.layer_dims[0]:
        raise ShapeError(f"batch must be (n, {net.layer_dims[0]}), got {x.shape}")
    if task_id not in net.heads:
        raise InvalidSpecError(f"no head registered for task {task_id}")
    return mask, x


def _unpack(net: Network, w: np.ndarray, task_id: int):
    layers = [(w[ws].reshape(fo, fi), w[bs]) for ws, bs, fi, fo in net.layer_slices()]
    hw, hb, k = net.head_slices(task_id)
    return layers, (w[hw].reshape(k, net.layer_dims[-1]), w[hb])


def _forward_cache(net, w, task_id, x):
    layers, (wh, bh) = _unpack(net, w, task_id)
    acts = [x]
    h = x
    for wl, bl in layers:
        h = np.maximum(h @ wl.T + bl, 0.0)
        acts.append(h)
    return acts, h @ wh.T + bh


def forward(net: Network, mask, task_id: int, batch) -> np.ndarray:
    """Logits for ``batch`` with masked-off weights treated as exact zeros."""
    mask, x = _check(net, mask, task_id, batch)
    _, logits = _forward_cache(net, net.weights * mask, task_id, x)
    return logits


def _softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    n = labels.size
    loss = -logp[np.arange(n), labels].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    return float(loss), dlogits / n


def loss_and_grad(net: Network, mask, task_id: int, inputs, labels) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient w.r.t. the flat weights.

    The gradient is taken with respect to the raw weight vector, so entries
    with ``mask == 0`` (and entries of other tasks' heads) are zero.
    """
    mask, x = _check(net, mask, task_id, inputs)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise ShapeError("labels must be a vector matching the batch rows")
    w = net.weights * mask
    acts, logits = _forward_cache(net, w, task_id, x)
    loss, dlogits = _softmax_xent(logits, y)

    grad = np.zeros_like(w)
    layers, (wh, _) = _unpack(net, w, task_id)
    hw, hb, _ = net.head_slices(task_id)
    grad[hw] = (dlogits.T @ acts[-1]).ravel()
    grad[hb] = dlogits.sum(axis=0)
    delta = (dlogits @ wh) * (acts[-1] > 0)
    slices = net.layer_slices()
    for i in range(len(layers) - 1, -1, -1):
        ws, bs, _, _ = slices[i]
        grad[ws] = (delta.T @ acts[i]).ravel()
        grad[bs] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ layers[i][0]) * (acts[i] > 0)
    return loss, grad * mask


def sgd_train(net: Network, trainable, task_id: int, split, cfg: TrainConfig,
              mask=None) -> TrainReport:
    """Minibatch SGD on softmax cross-entropy, updating only trainable weights.

    ``split`` is any object with ``inputs`` and ``labels`` attributes.  The
    forward ``mask`` defaults to all ones.  Weights with ``trainable == 0``
    are never written, so they stay bitwise unchanged.
    """
    x = np.asarray(split.inputs, dtype=np.float64)
    y = np.asarray(split.labels, dtype=np.int64)
    if x.shape[0] == 0:
        raise InvalidDataError("cannot train on an empty dataset")
    if mask is None:
        mask = np.ones_like(net.weights)
    idx = np.flatnonzero(np.asarray(trainable))
    initial, _ = loss_and_grad(net, mask, task_id, x, y)

    rng = np.random.default_rng(cfg.seed)
    velocity = np.zeros(idx.size)
    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grad = loss_and_grad(net, mask, task_id, x[batch], y[batch])
            if idx.size == 0:
                continue
            step = grad[idx]
            if cfg.optimizer == "momentum-sgd":
                velocity = cfg.momentum * velocity + step
                step = velocity
            net.weights[idx] -= cfg.learning_rate * step

    final, _ = loss_and_grad(net, mask, task_id, x, y)
    return TrainReport(initial, final, cfg.epochs)


def predict_labels(net: Network, mask, task_id: int, inputs) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class
    return np.argmax(forward(net, mask, task_id, inputs), axis=1)


def save_network(path, net: Network, owner=None) -> None:
    """Write ``net`` (and optionally an owner vector) in a bit-exact binary form.

    A ``.json`` suffix selects the human-readable form instead.
    """
    path = str(path)
    if path.endswith(".json"):
        data = net.to_dict()
        if owner is not None:
            data["owner"] = np.asarray(owner).tolist()
        with open(path, "w") as fh:
            json.dump(data, fh)
        return
    heads = np.array([(k, s, c) for k, (s, c) in sorted(net.heads.items())],
                     dtype=np.int64).reshape(-1, 3)
    arrays = dict(layer_dims=np.asarray(net.layer_dims, dtype=np.int64),
                  weights=net.weights.astype(np.float64), heads=heads,
                  seed=np.asarray([net.seed], dtype=np.int64))
    if owner is not None:
        arrays["owner"] = np.asarray(owner, dtype=np.int64)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_network(path) -> tuple[Network, np.ndarray | None]:
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        owner = np.asarray(data["owner"], dtype=np.int64) if "owner" in data else None
        return Network.from_dict(data), owner
    with np.load(path) as z:
        net = Network([int(d) for d in z["layer_dims"]], z["weights"].copy(),
                      {int(k): (int(s), int(c)) for k, s, c in z["heads"]},
                      int(z["seed"][0]))
        owner = z["owner"].copy() if "owner" in z.files else None
    return net, owner
