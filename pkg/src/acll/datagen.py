"""Synthetic two-dimensional classification tasks of graded difficulty.

``blobs`` are Gaussian clusters on a square grid (linearly separable at low
noise), ``rings`` concentric annuli, ``spirals`` interleaved arms.  The three
splits come from independent child streams of one seed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError

__all__ = ["DatasetSplit", "TaskData", "generate_dataset", "KINDS", "PRESETS", "preset_tasks"]

KINDS = ("blobs", "rings", "spirals")
SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class DatasetSplit:
    inputs: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str

    def __len__(self):
        return self.labels.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "label"])
            for (a, b), y in zip(self.inputs, self.labels):
                w.writerow([repr(float(a)), repr(float(b)), int(y)])


@dataclass(frozen=True)
class TaskData:
    train: DatasetSplit
    val: DatasetSplit
    test: DatasetSplit

    @property
    def class_count(self) -> int:
        return self.train.class_count


def _balanced_labels(n: int, k: int) -> np.ndarray:
    return np.arange(n) % k


def _blobs(labels, k, noise, rng):
    side = int(np.ceil(np.sqrt(k)))
    grid = np.array([(i % side, i // side) for i in range(k)], dtype=np.float64)
    centers = 2.0 * (grid - grid.mean(axis=0))
    return centers[labels] + noise * rng.standard_normal((labels.size, 2))


def _rings(labels, k, noise, rng):
    radius = (labels + 1.0) / k
    angle = rng.uniform(0.0, 2.0 * np.pi, labels.size)
    r = radius + noise * rng.standard_normal(labels.size)
    return np.c_[r * np.cos(angle), r * np.sin(angle)]


def _spirals(labels, k, noise, rng, turns=1.0):
    t = np.sqrt(rng.uniform(0.0, 1.0, labels.size))
    r = 0.1 + 0.9 * t
    angle = 2.0 * np.pi * (turns * t + labels / k)
    pts = np.c_[r * np.cos(angle), r * np.sin(angle)]
    return pts + noise * rng.standard_normal(pts.shape)


_GENERATORS = {"blobs": _blobs, "rings": _rings, "spirals": _spirals}


def generate_dataset(kind: str, class_count: int, n_per_split: int, noise_std: float,
                     seed: int) -> TaskData:
    """Train, validation and test splits of ``n_per_split`` points each.

    Labels cycle through the classes, so each class count is within one of
    ``n_per_split / class_count``.
    """
    if kind not in _GENERATORS:
        raise InvalidSpecError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    if class_count < 2:
        raise InvalidSpecError("class_count must be >= 2")
    if noise_std < 0:
        raise InvalidSpecError("noise_std must be >= 0")
    if n_per_split < class_count:
        raise InvalidSpecError("n_per_split must be >= class_count")
    streams = np.random.SeedSequence(int(seed)).spawn(len(SPLITS))
    splits = []
    for name, stream in zip(SPLITS, streams):
        rng = np.random.default_rng(stream)
        labels = rng.permutation(_balanced_labels(n_per_split, class_count))
        x = _GENERATORS[kind](labels, class_count, noise_std, rng)
        splits.append(DatasetSplit(x, labels.astype(np.int64), class_count, name))
    return TaskData(*splits)


# kind, class_count, noise_std for each task of the shipped sequences
PRESETS = {
    "SIMPLE_HARD": [("blobs-2", "blobs", 2, 0.3), ("spirals-5", "spirals", 5, 0.05),
                    ("rings-3", "rings", 3, 0.05)],
    "HARD_SIMPLE": [("spirals-5", "spirals", 5, 0.05), ("blobs-2", "blobs", 2, 0.3),
                    ("rings-3", "rings", 3, 0.05)],
}


def preset_tasks(name: str, n_per_split: int = 1000, seed: int = 0) -> list[tuple[str, TaskData]]:
    """Named datasets of a shipped sequence; task ``i`` uses seed ``seed + i``."""
    if name not in PRESETS:
        raise InvalidSpecError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return [(label, generate_dataset(kind, k, n_per_split, noise, seed + i))
            for i, (label, kind, k, noise) in enumerate(PRESETS[name])]
