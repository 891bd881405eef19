"""Bayesian minimisation of ``size + lam * risk`` over pruning fractions.

Every evaluation lands in an :class:`EvalCache` that stores the raw
``(size, risk)`` pair rather than the scalarised objective.  A round at a new
multiplier therefore starts from all earlier evidence, re-weighted, without
touching the network again.
"""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .errors import EvaluationError, InvalidMultiplierError, InvalidSpecError
from .surrogate import default_hyper, ei_from_moments, fit_gp, posterior_batch

__all__ = ["CacheEntry", "EvalCache", "BoBudget", "canonical_key", "lagrangian_objective",
           "seed_from_cache", "bo_minimize", "GRID_1D"]

KEY_DIGITS = 12
GRID_1D = np.arange(1001) / 1000.0


def canonical_key(theta) -> tuple[float, ...]:
    return tuple(round(float(t), KEY_DIGITS) for t in np.atleast_1d(theta))


@dataclass(frozen=True)
class CacheEntry:
    theta: tuple[float, ...]
    size: float
    risk: float
    eval_index: int


class EvalCache:
    """Append-only map from canonical theta to measured ``(size, risk)``."""

    def __init__(self):
        self._entries: dict[tuple[float, ...], CacheEntry] = {}
        self._lock = threading.Lock()
        # signatures of finished BO rounds, see bo_minimize
        self.rounds: set[tuple] = set()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, theta) -> bool:
        return canonical_key(theta) in self._entries

    def __iter__(self):
        with self._lock:
            return iter(list(self._entries.values()))

    def get(self, theta) -> CacheEntry | None:
        return self._entries.get(canonical_key(theta))

    def insert(self, theta, size: float, risk: float) -> CacheEntry:
        key = canonical_key(theta)
        with self._lock:
            if key in self._entries:
                raise InvalidSpecError(f"theta {key} is already cached")
            entry = CacheEntry(key, float(size), float(risk), len(self._entries))
            self._entries[key] = entry
        return entry

    def entries(self) -> list[CacheEntry]:
        return list(self)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"theta": list(e.theta), "size": e.size, "risk": e.risk})
                 for e in self]
        return "".join(line + "\n" for line in lines)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> EvalCache:
        cache = cls()
        for line in text.splitlines():
            if line.strip():
                rec = json.loads(line)
                cache.insert(rec["theta"], rec["size"], rec["risk"])
        return cache


@dataclass(frozen=True)
class BoBudget:
    """Evaluation budget of one BO round.

    A round ends early once no uncached candidate has an expected
    improvement above ``ei_tol``; with the default of 0 that is when the
    acquisition is identically zero in floating point.
    """

    n_init: int = 5
    n_iter: int = 10
    seed: int = 0
    ei_tol: float = 0.0

    def __post_init__(self):
        if self.n_init < 2 or self.n_iter < 1:
            raise InvalidSpecError("need n_init >= 2 and n_iter >= 1")
        if self.ei_tol < 0:
            raise InvalidSpecError("ei_tol must be >= 0")


def lagrangian_objective(size: float, risk: float, lam: float) -> float:
    if lam < 0:
        raise InvalidMultiplierError(f"multiplier must be >= 0, got {lam}")
    return size + lam * risk


def seed_from_cache(cache: EvalCache, lam: float) -> tuple[list[tuple[float, ...]], list[float]]:
    """Cached points with their objective re-weighted at ``lam``."""
    if lam < 0:
        raise InvalidMultiplierError(f"multiplier must be >= 0, got {lam}")
    entries = cache.entries()
    return [e.theta for e in entries], [lagrangian_objective(e.size, e.risk, lam) for e in entries]


def _initial_design(dim: int, n: int, seed: int) -> np.ndarray:
    """Low-discrepancy design that always starts with the all-0 and all-1 corners."""
    if dim == 1:
        pts = np.linspace(0.0, 1.0, n)
        order = [0, n - 1] + list(range(1, n - 1))
        return pts[order][:, None]
    sobol = qmc.Sobol(dim, scramble=True, seed=seed).random(max(n - 2, 1))
    return np.vstack([np.zeros(dim), np.ones(dim), sobol])[:n]


def _candidates(model, best: float, dim: int, rng: np.random.Generator):
    """Candidate points and their EI, best first."""
    if dim == 1:
        cand = GRID_1D[:, None]
        mean, var = posterior_batch(model, cand)
        ei = ei_from_moments(mean, np.sqrt(var), best)
    else:
        cand = rng.random((256, dim))
        mean, var = posterior_batch(model, cand)
        ei = ei_from_moments(mean, np.sqrt(var), best)
        refined = [_refine(model, cand[i], best) for i in np.argsort(-ei, kind="stable")[:4]]
        rx = np.array([r[0] for r in refined])
        cand = np.vstack([rx, cand])
        ei = np.concatenate([[r[1] for r in refined], ei])
    order = np.argsort(-ei, kind="stable")
    return cand[order], ei[order]


def _refine(model, x0: np.ndarray, best: float) -> tuple[np.ndarray, float]:
    x = x0.copy()
    fx = _ei_at(model, x, best)
    for step in (0.1, 0.01, 0.001):
        for j in range(x.size):
            trial = np.repeat(x[None, :], 21, axis=0)
            trial[:, j] = np.clip(x[j] + np.linspace(-step, step, 21), 0.0, 1.0)
            mean, var = posterior_batch(model, trial)
            ei = ei_from_moments(mean, np.sqrt(var), best)
            i = int(np.argmax(ei))
            if ei[i] > fx:
                x, fx = trial[i], float(ei[i])
    return x, fx


def _ei_at(model, x, best):
    mean, var = posterior_batch(model, x[None, :])
    return float(ei_from_moments(mean, np.sqrt(var), best)[0])


def _evaluate_into(cache: EvalCache, evaluate, theta) -> None:
    key = canonical_key(theta)
    try:
        size, risk = evaluate(np.asarray(key))
    except Exception as exc:
        raise EvaluationError(key, exc) from exc
    cache.insert(key, size, risk)


def best_cached(cache: EvalCache, lam: float) -> tuple[tuple[float, ...], float]:
    """Cache entry minimising the objective; ties go to the smaller size."""
    best = None
    for e in cache:
        obj = lagrangian_objective(e.size, e.risk, lam)
        rank = (obj, e.size, e.eval_index)
        if best is None or rank < best[0]:
            best = (rank, e.theta)
    if best is None:
        raise InvalidSpecError("cache is empty")
    return best[1], best[0][0]


def bo_minimize(evaluate: Callable[[np.ndarray], tuple[float, float]], lam: float,
                cache: EvalCache, budget: BoBudget = BoBudget(), dim: int = 1):
    """Minimise ``size + lam * risk`` over ``[0, 1]^dim``.

    Parameters
    ----------
    evaluate : callable
        Maps a pruning-fraction vector to ``(size, risk)``; assumed
        deterministic.
    lam : float
        Non-negative multiplier on the risk.
    cache : EvalCache
        Shared evidence.  The GP is seeded from all of it and every new
        evaluation is appended.
    budget : BoBudget
    dim : int
        Dimension of the search box.

    Returns
    -------
    theta : tuple of float
        Best cached point at ``lam`` (over the whole cache, not just this
        round's evaluations).
    objective : float
        Its objective value.

    Notes
    -----
    Candidates are a 1001-point grid in one dimension and 256 random points
    plus coordinate refinement otherwise.  Cached candidates are skipped in
    favour of the best uncached one.  A round that has already been run on
    this cache with the same multiplier and budget is not repeated.
    """
    if lam < 0:
        raise InvalidMultiplierError(f"multiplier must be >= 0, got {lam}")
    if dim < 1:
        raise InvalidSpecError("dim must be >= 1")
    signature = (round(float(lam), KEY_DIGITS), dim, budget)
    if signature in cache.rounds:
        return best_cached(cache, lam)

    for theta in _initial_design(dim, budget.n_init, budget.seed):
        if len(cache) >= budget.n_init:
            break
        if theta not in cache:
            _evaluate_into(cache, evaluate, theta)

    rng = np.random.default_rng(budget.seed)
    for _ in range(budget.n_iter):
        points, values = seed_from_cache(cache, lam)
        model = fit_gp(np.asarray(points), values, default_hyper(values))
        cand, ei = _candidates(model, min(values), dim, rng)
        pick = next((i for i in range(len(cand)) if cand[i] not in cache), None)
        if pick is None or ei[pick] <= budget.ei_tol:
            break
        _evaluate_into(cache, evaluate, cand[pick])

    cache.rounds.add(signature)
    return best_cached(cache, lam)
