"""Multiplier search on a synthetic risk curve.

The risk stays at 0.10 up to a pruning fraction of 0.8 and then jumps to
0.40.  With a tolerance of 0.02 the best feasible fraction is exactly 0.8.
The script prints every multiplier round and the final pick.
"""
import numpy as np

from acll import DualSearchConfig, EvalCache, acll_select


def staircase(theta):
    t = float(theta[0])
    return 1.0 - t, 0.10 if t <= 0.8 else 0.40


cache = EvalCache()
result = acll_select(staircase, reference_risk=0.10, cfg=DualSearchConfig(epsilon=0.02),
                     cache=cache)

print(f"{'round':>5} {'lambda':>9} {'theta':>7} {'size':>6} {'risk':>5} {'bracket':>20} new")
for i, r in enumerate(result.state.trail):
    print(f"{i:>5} {r.lam:>9.4f} {r.theta[0]:>7.3f} {r.size:>6.3f} {r.risk:>5.2f} "
          f"[{r.lo:>8.4f}, {r.hi:>8.4f}] {r.new_evaluations:>3}")

print(f"\nchosen theta {result.theta[0]:.3f} (size {result.size:.3f}, risk {result.risk:.2f})")
print(f"{result.n_evaluations} evaluations, converged={result.converged}")

# the cache holds raw (size, risk) pairs, so any multiplier can be replayed for free
thetas = np.array([e.theta[0] for e in cache])
print("evaluated fractions:", np.round(np.sort(thetas), 3))
