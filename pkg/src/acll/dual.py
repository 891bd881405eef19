"""Constrained selection of the pruning fraction by bisection on the multiplier.

We want the smallest ``size`` whose ``risk`` stays within ``reference_risk +
epsilon``.  Each round minimises ``size + lam * risk`` with Bayesian
optimisation and moves the bracket on ``lam`` by the sign of the constraint
violation at the round's minimiser.  The final answer is read off the whole
evaluation cache.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .boopt import KEY_DIGITS, BoBudget, EvalCache, bo_minimize, lagrangian_objective
from .errors import EvaluationError, InvalidSpecError, InvalidStateError

__all__ = ["DualSearchConfig", "RoundRecord", "DualState", "DualResult", "acll_select",
           "dual_value", "feasible_minimum", "refine_boundary"]


@dataclass(frozen=True)
class DualSearchConfig:
    epsilon: float = 0.02
    lambda_lo: float = 0.0
    lambda_hi: float = 64.0
    lambda_tol: float = 0.01
    max_rounds: int = 12
    lambda_floor: float = 0.004
    refine_steps: int = 10
    bo_budget: BoBudget = field(default_factory=BoBudget)

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidSpecError("epsilon must be >= 0")
        if not 0 <= self.lambda_lo < self.lambda_hi:
            raise InvalidSpecError("need 0 <= lambda_lo < lambda_hi")
        if self.lambda_tol <= 0:
            raise InvalidSpecError("lambda_tol must be > 0")
        if not 0 < self.lambda_floor < self.lambda_hi:
            raise InvalidSpecError("need 0 < lambda_floor < lambda_hi")
        if self.refine_steps < 0:
            raise InvalidSpecError("refine_steps must be >= 0")
        if self.max_rounds < 2:
            raise InvalidSpecError("max_rounds must be >= 2")


@dataclass(frozen=True)
class RoundRecord:
    lam: float
    theta: tuple[float, ...]
    size: float
    risk: float
    violation: float
    lo: float
    hi: float
    new_evaluations: int


@dataclass
class DualState:
    round: int = 0
    lambda_t: float = 0.0
    incumbent: tuple[tuple[float, ...], float, float] | None = None
    trail: list[RoundRecord] = field(default_factory=list)

    def trail_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r)) + "\n" for r in self.trail)


@dataclass(frozen=True)
class DualResult:
    theta: tuple[float, ...]
    lambda_final: float
    state: DualState
    size: float
    risk: float
    infeasible: bool
    converged: bool
    n_evaluations: int


def dual_value(cache: EvalCache, lam: float) -> float:
    """Lower envelope ``min_theta size + lam * risk`` over cached points."""
    entries = cache.entries()
    if not entries:
        raise InvalidStateError("dual value of an empty cache")
    return min(lagrangian_objective(e.size, e.risk, lam) for e in entries)


def feasible_minimum(cache: EvalCache, bound: float):
    """Smallest-size cached entry with ``risk <= bound``, or None.

    Ties go to the lower risk, then to the earlier evaluation.
    """
    feasible = [e for e in cache if e.risk <= bound]
    if not feasible:
        return None
    return min(feasible, key=lambda e: (e.size, e.risk, e.eval_index))


def refine_boundary(evaluate, cache: EvalCache, bound: float, max_steps: int,
                    grid: float = 1e-3) -> int:
    """Bisect between the largest feasible cached fraction and the next cached one.

    One-dimensional only.  Midpoints are snapped to the ``grid`` used by the
    acquisition, so the gap closes to a single grid step in at most
    ``log2(gap / grid)`` evaluations.  Returns the number of new evaluations.
    """
    feasible = [e.theta[0] for e in cache if e.risk <= bound]
    if not feasible:
        return 0
    a = max(feasible)
    n_new = 0
    while n_new < max_steps:
        above = [e.theta[0] for e in cache if e.theta[0] > a]
        if not above:
            break
        b = min(above)
        m = round(round((a + b) / (2 * grid)) * grid, KEY_DIGITS)
        if not a < m < b:
            break
        try:
            size, risk = evaluate(np.array([m]))
        except Exception as exc:
            raise EvaluationError((m,), exc) from exc
        cache.insert((m,), size, risk)
        n_new += 1
        if risk <= bound:
            a = m
    return n_new


def acll_select(evaluate: Callable[[np.ndarray], tuple[float, float]], reference_risk: float,
                cfg: DualSearchConfig = DualSearchConfig(), cache: EvalCache | None = None,
                dim: int = 1) -> DualResult:
    """Most compressed setting whose risk is within ``epsilon`` of the reference.

    Round 0 runs at ``lambda_lo`` and round 1 at ``lambda_hi`` (doubled once
    if still infeasible); later rounds bisect the bracket.  A feasible
    round-minimiser lowers the upper end, an infeasible one raises the lower
    end.  Bisection is geometric, with ``lo`` floored at ``lambda_floor``
    (multipliers below it weigh risk too little to matter), so the relative
    stopping rule ``(hi - lo) / hi < lambda_tol`` is reached in a bounded
    number of rounds.  The search also stops after ``max_rounds`` rounds.

    In one dimension the gap between the largest feasible cached fraction and
    the next cached fraction above it is then bisected (``refine_steps``
    evaluations at most) before the final read-out: the smallest-size cached
    point that satisfies the constraint.

    When no cached point satisfies the constraint the result carries
    ``infeasible=True`` and ``theta`` is all zeros (no compression).
    """
    if not 0.0 <= reference_risk <= 1.0:
        raise InvalidSpecError("reference_risk must lie in [0, 1]")
    cache = EvalCache() if cache is None else cache
    bound = reference_risk + cfg.epsilon
    state = DualState()
    lo, hi = cfg.lambda_lo, cfg.lambda_hi
    have_feasible_lambda = False
    converged = False
    start = len(cache)
    retried = False

    def run(lam):
        before = len(cache)
        theta, _ = bo_minimize(evaluate, lam, cache, cfg.bo_budget, dim)
        e = cache.get(theta)
        return theta, e.size, e.risk, e.risk - bound, len(cache) - before

    t = 0
    while t < cfg.max_rounds:
        if t == 0:
            lam = lo
        elif t == 1 or (retried and t == 2 and not have_feasible_lambda):
            lam = hi
        else:
            lam = float(np.sqrt(max(lo, cfg.lambda_floor) * hi))
        theta, size, risk, v, n_new = run(lam)
        state.round, state.lambda_t = t, lam
        if v > 0:
            lo = max(lo, lam)
        else:
            hi = lam
            have_feasible_lambda = True
            if state.incumbent is None or size < state.incumbent[1]:
                state.incumbent = (theta, size, risk)
        state.trail.append(RoundRecord(lam, theta, size, risk, v, lo, hi, n_new))
        t += 1

        if t == 1 and v <= 0:
            # the unconstrained size minimiser is already feasible
            converged = True
            break
        if t == 2 and not have_feasible_lambda and not retried:
            retried = True
            hi = 2.0 * cfg.lambda_hi
            continue
        if t >= 2 and not have_feasible_lambda:
            break
        if t >= 2 and (hi - max(lo, cfg.lambda_floor)) / hi < cfg.lambda_tol:
            converged = True
            break

    if dim == 1:
        refine_boundary(evaluate, cache, bound, cfg.refine_steps)
    best = feasible_minimum(cache, bound)
    n_eval = len(cache) - start
    if best is None:
        zero = (0.0,) * dim
        e = cache.get(zero)
        return DualResult(zero, state.lambda_t, state,
                          e.size if e else float("nan"), e.risk if e else float("nan"),
                          True, converged, n_eval)
    lam_final = hi if have_feasible_lambda else state.lambda_t
    return DualResult(best.theta, lam_final, state, best.size, best.risk, False,
                      converged, n_eval)
