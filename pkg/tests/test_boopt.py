import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acll import (BoBudget, EvalCache, EvaluationError, InvalidMultiplierError, InvalidSpecError,
                  bo_minimize, fit_gp, lagrangian_objective, posterior, seed_from_cache)
from acll.boopt import GRID_1D, best_cached
from acll.surrogate import default_hyper


def grid_oracle(evaluate, lam):
    """Exhaustive minimiser of size + lam * risk over the 1001-point grid."""
    vals = [s + lam * r for s, r in (evaluate(np.array([t])) for t in GRID_1D)]
    return GRID_1D[int(np.argmin(vals))], min(vals)


class Counter:
    def __init__(self, fn):
        self.fn = fn
        self.calls = []

    def __call__(self, theta):
        self.calls.append(tuple(theta))
        return self.fn(theta)


def test_objective_examples():
    assert lagrangian_objective(0.2, 0.1, 5) == pytest.approx(0.7)
    assert lagrangian_objective(0.3, 0.9, 0) == 0.3
    assert lagrangian_objective(0.0, 1.0, 3) == 3.0
    with pytest.raises(InvalidMultiplierError):
        lagrangian_objective(0.1, 0.1, -1)


def test_seed_examples():
    c = EvalCache()
    assert seed_from_cache(c, 1.0) == ([], [])
    c.insert([0.5], 0.5, 0.02)
    pts, vals = seed_from_cache(c, 10)
    assert pts == [(0.5,)] and vals == [pytest.approx(0.7)]
    c.insert([0.1], 0.9, 0.3)
    assert seed_from_cache(c, 0)[1] == [0.5, 0.9]


def test_cache_rejects_duplicates_and_round_trips():
    c = EvalCache()
    c.insert([0.25], 0.75, 0.1)
    with pytest.raises(InvalidSpecError):
        c.insert([0.25 + 1e-14], 0.1, 0.1)
    back = EvalCache.from_jsonl(c.to_jsonl())
    assert back.entries() == c.entries()
    assert json.loads(c.to_jsonl()) == {"theta": [0.25], "size": 0.75, "risk": 0.1}


def test_risk_free_compression_prunes_everything():
    theta, obj = bo_minimize(lambda t: (1 - t[0], 0.0), 3.0, EvalCache())
    assert abs(theta[0] - 1.0) <= 1e-3 and obj < 1e-3


def test_affine_objective_minimised_at_zero():
    theta, obj = bo_minimize(lambda t: (1 - t[0], t[0]), 2.0, EvalCache())
    assert theta[0] <= 1e-3 and obj == pytest.approx(1.0, abs=1e-3)


def _piecewise(t):
    return 1 - t[0], (0.0 if t[0] <= 0.6 else 0.5)


def test_piecewise_interior_minimum():
    oracle_theta, _ = grid_oracle(_piecewise, 2.0)
    assert oracle_theta == pytest.approx(0.6)
    theta, _ = bo_minimize(_piecewise, 2.0, EvalCache(), BoBudget(n_init=5, n_iter=10))
    assert 0.6 - 0.02 <= theta[0] <= 0.6


def test_budget_is_respected_and_cache_grows():
    f = Counter(lambda t: (float(np.sin(5 * t[0]) ** 2), float(t[0])))
    cache = EvalCache()
    bo_minimize(f, 1.0, cache, BoBudget(n_init=4, n_iter=6))
    assert len(f.calls) == len(cache) <= 10
    assert len(set(f.calls)) == len(f.calls)


def test_round_is_pure_on_repeat():
    f = Counter(lambda t: (1 - t[0], 0.3 * t[0] ** 2))
    cache = EvalCache()
    first = bo_minimize(f, 1.5, cache)
    n = len(f.calls)
    second = bo_minimize(f, 1.5, cache)
    assert first == second and len(f.calls) == n


def test_cached_points_are_not_reevaluated():
    f = Counter(lambda t: (1 - t[0], t[0] ** 2))
    cache = EvalCache()
    bo_minimize(f, 1.0, cache)
    bo_minimize(f, 4.0, cache)
    assert len(f.calls) == len(set(f.calls)) == len(cache)


def test_returns_best_over_whole_cache():
    cache = EvalCache()
    cache.insert([0.37], 0.0, 0.0)
    theta, obj = bo_minimize(lambda t: (1 - t[0], 0.5), 1.0, cache)
    assert theta == (0.37,) and obj == 0.0


def test_multi_dimensional_search():
    def f(t):
        return float(1 - t.mean()), float(((t - np.array([0.3, 0.7])) ** 2).sum())

    cache = EvalCache()
    theta, obj = bo_minimize(f, 5.0, cache, BoBudget(n_init=6, n_iter=15, seed=2), dim=2)
    assert len(theta) == 2 and (0.0,) * 2 in cache and (1.0,) * 2 in cache
    assert obj <= min(f(np.array(e.theta))[0] + 5 * f(np.array(e.theta))[1] for e in cache) + 1e-12


def test_failed_evaluation_is_wrapped():
    def boom(t):
        if t[0] > 0.5:
            raise RuntimeError("diverged")
        return 1 - t[0], 0.0

    with pytest.raises(EvaluationError) as info:
        bo_minimize(boom, 1.0, EvalCache())
    assert info.value.theta == (1.0,)


def test_negative_multiplier_rejected():
    with pytest.raises(InvalidMultiplierError):
        bo_minimize(lambda t: (0.0, 0.0), -0.1, EvalCache())


def test_best_cached_tie_goes_to_smaller_size():
    c = EvalCache()
    c.insert([0.2], 0.5, 0.25)
    c.insert([0.8], 0.25, 0.5)
    assert best_cached(c, 1.0)[0] == (0.8,)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)),
                min_size=2, max_size=12, unique_by=lambda r: round(r[0], 6)),
       st.floats(0, 50))
def test_reweighting_matches_fresh_objective(rows, lam):
    cache = EvalCache()
    for t, s, r in rows:
        cache.insert([round(t, 6)], s, r)
    pts, vals = seed_from_cache(cache, lam)
    fresh = [s + lam * r for _, s, r in rows]
    assert vals == fresh
    model = fit_gp(np.array(pts), vals, default_hyper(vals))
    twin = fit_gp(np.array([[round(t, 6)] for t, _, _ in rows]), fresh, default_hyper(fresh))
    for q in (0.0, 0.33, 0.9):
        assert posterior(model, [q]) == posterior(twin, [q])
