"""How far can one easy task be pruned?

Train a 2-64-64 network on two Gaussian blobs, let the selector choose the
pruning fraction under a 0.02 risk tolerance, then print the evaluated
(fraction, size, risk) curve from the cache.
"""
import numpy as np

from acll import (DualSearchConfig, Strategy, generate_dataset, init_network, make_task_specs,
                  new_ownership, train_task)

data = generate_dataset("blobs", 2, 2000, 0.3, seed=0)
(task,) = make_task_specs([("blobs-2", data)], seed=0)

net = init_network([2, 64, 64], seed=0)
ownership = new_ownership(net.weights.size)
net, ownership, record = train_task(net, ownership, task, Strategy.acll(0.02), DualSearchConfig())

print(f"reference validation risk {record.reference_risk:.4f}")
print(f"risk bound               {record.reference_risk + 0.02:.4f}\n")
print(f"{'theta':>6} {'size':>7} {'risk':>7}")
for e in sorted(record.cache, key=lambda e: e.theta):
    flag = "" if e.risk <= record.reference_risk + 0.02 else "  infeasible"
    print(f"{e.theta[0]:>6.3f} {e.size:>7.4f} {e.risk:>7.4f}{flag}")

print(f"\nchosen theta {record.theta[0]:.3f}: keeps {record.retained_count} of "
      f"{int(net.shared_mask().sum())} shared weights, val risk {record.val_risk:.4f}")
print(f"free for later tasks: {np.mean(ownership.owner[:net.n_trunk][net.shared_mask()[:net.n_trunk]] == 0):.1%}")
