"""Acceptance criteria, one test each.

Every test appends a ``PASS``/``FAIL`` line that is printed in the terminal
summary (and echoed to stdout) so a run shows the verdict per criterion.
"""
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from acll import (DualSearchConfig, EvalCache, acll_select, dual_value, fit_gp, init_network,
                  add_head, loss_and_grad, posterior, seed_from_cache)
from acll.boopt import GRID_1D
from acll.surrogate import default_hyper

from conftest import ACCEPTANCE_LINES, preset_run

ROOT = Path(__file__).resolve().parents[1]
PRESETS = ("SIMPLE_HARD", "HARD_SIMPLE")
EPS = 0.02


def verdict(n, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_01_constraint_satisfaction():
    worst, slowest, ok = -np.inf, 0.0, True
    for preset in PRESETS:
        rep, _, seconds = preset_run(preset, "acll")
        slowest = max(slowest, seconds)
        for rec in rep.tasks:
            selected = rec.cache.get(rec.theta)
            ok &= selected is not None and rec.val_risk == selected.risk
            ok &= rec.val_risk <= rec.reference_risk + EPS
            worst = max(worst, rec.val_risk - rec.reference_risk)
    ok &= slowest < 600
    verdict(1, "post-finetune val risk <= reference + 0.02", ok,
            f"max excess {worst:+.4f}, slowest sequence {slowest:.1f}s")


def test_02_no_forgetting():
    ok, checked = True, 0
    for preset in PRESETS:
        for kind, param in (("acll", None), ("fixed", 0.5)):
            rep, _, _ = preset_run(preset, kind, param)
            for rec in rep.tasks:
                ok &= np.array_equal(rec.test_predictions_post, rec.test_predictions_end)
                checked += 1
    verdict(2, "mask strategies keep earlier predictions bitwise", ok, f"{checked} task records")


def test_03_directional_comparison():
    acll, _, _ = preset_run("SIMPLE_HARD", "acll")
    fixed, _, _ = preset_run("SIMPLE_HARD", "fixed", 0.5)
    theta_simple = acll.tasks[0].theta[0]
    hard_acll = acll.tasks[1].acc_end_of_sequence
    hard_fixed = fixed.tasks[1].acc_end_of_sequence
    verdict(3, "simple-task theta > 0.5 and hard-task accuracy >= fixed(0.5)",
            theta_simple > 0.5 and hard_acll >= hard_fixed,
            f"theta {theta_simple:.3f}, hard acc {hard_acll:.4f} vs {hard_fixed:.4f}")


def test_04_capacity_arithmetic():
    rep, _, _ = preset_run("SIMPLE_HARD", "fixed", 0.5)
    dims = rep.layer_dims
    n_shared = sum(a * b for a, b in zip(dims[:-1], dims[1:]))
    free_after_two = round((1 - rep.owned_fraction[1]) * n_shared)
    verdict(4, "fixed(0.5) leaves 25% free after two tasks",
            abs(free_after_two - n_shared / 4) <= 1, f"{free_after_two} of {n_shared}")


def test_05_caching_equivalence():
    rng = np.random.default_rng(5)

    def evaluate(t):
        return float(1 - t[0]), float(0.3 * np.sin(7 * t[0]) ** 2)

    cache = EvalCache()
    for t in rng.random(15):
        t = round(float(t), 12)  # the cache keys on 12-digit fractions
        cache.insert([t], *evaluate([t]))
    worst = 0.0
    for lam in (0.0, 0.7, 3.0, 40.0):
        pts, vals = seed_from_cache(cache, lam)
        fresh = [evaluate(p)[0] + lam * evaluate(p)[1] for p in pts]
        a = fit_gp(np.array(pts), vals, default_hyper(vals))
        b = fit_gp(np.array(pts), fresh, default_hyper(fresh))
        for q in rng.random(100):
            (ma, va), (mb, vb) = posterior(a, [q]), posterior(b, [q])
            worst = max(worst, abs(ma - mb), abs(va - vb))
    verdict(5, "reweighted cache GP equals fresh GP", worst <= 1e-12, f"max gap {worst:.1e}")


def test_06_dual_concavity():
    grid = np.linspace(0.0, 64.0, 50)
    worst, ok = np.inf, True
    for preset in PRESETS:
        rep, _, _ = preset_run(preset, "acll")
        for rec in rep.tasks:
            g = np.array([dual_value(rec.cache, lam) for lam in grid])
            for i in range(50):
                for k in range(i + 2, 50, 2):
                    slack = g[(i + k) // 2] - (g[i] + g[k]) / 2
                    worst = min(worst, slack)
                    ok &= slack >= -1e-12
    verdict(6, "dual value midpoint-concave on a 50-point grid", ok, f"min slack {worst:.2e}")


def test_07_bisection_convergence():
    cfg = DualSearchConfig()
    ok, lengths = True, []
    for preset in PRESETS:
        rep, _, _ = preset_run(preset, "acll")
        for rec in rep.tasks:
            lengths.append(len(rec.trail))
            ok &= bool(rec.converged) and len(rec.trail) <= cfg.max_rounds <= 12
            last = rec.trail[-1]
            if len(rec.trail) > 1:
                ok &= (last["hi"] - max(last["lo"], cfg.lambda_floor)) / last["hi"] < cfg.lambda_tol
    verdict(7, "multiplier bracket meets tolerance within max_rounds", ok, f"trail lengths {lengths}")


def test_08_overhead_bound():
    cfg = DualSearchConfig()
    cap = 8 * (cfg.bo_budget.n_init + cfg.bo_budget.n_iter)
    counts = [rec.n_evaluations for preset in PRESETS
              for rec in preset_run(preset, "acll")[0].tasks]
    verdict(8, f"risk evaluations per selection <= {cap}", max(counts) <= cap, f"counts {counts}")


def test_09_staircase_oracle():
    def staircase(t):
        return 1 - t[0], (0.10 if t[0] <= 0.8 else 0.40)

    feasible = [t for t in GRID_1D if staircase([t])[1] <= 0.12]
    oracle = min(feasible, key=lambda t: staircase([t])[0])
    res = acll_select(staircase, 0.10, DualSearchConfig(epsilon=0.02))
    ok = abs(res.theta[0] - oracle) <= 1e-3 + 1e-12 and not res.infeasible
    verdict(9, "staircase selection within one grid step of the scan oracle", ok,
            f"theta {res.theta[0]:.3f}, oracle {oracle:.3f}")


def test_10_gradient_check():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(20):
        dims = [2] + list(rng.integers(2, 7, size=rng.integers(1, 3)))
        k = int(rng.integers(2, 5))
        net = init_network(dims, int(rng.integers(1 << 30)))
        add_head(net, 1, k)
        net.weights += rng.normal(0, 0.1, net.weights.size)
        x = rng.normal(size=(int(rng.integers(3, 10)), 2))
        y = rng.integers(0, k, x.shape[0])
        ones = np.ones(net.weights.size)
        _, g = loss_and_grad(net, ones, 1, x, y)
        w0 = net.weights.copy()
        fd = np.zeros_like(w0)
        for i in range(w0.size):
            net.weights = w0.copy(); net.weights[i] += 1e-5  # noqa: E702
            fp, _ = loss_and_grad(net, ones, 1, x, y)
            net.weights = w0.copy(); net.weights[i] -= 1e-5  # noqa: E702
            fm, _ = loss_and_grad(net, ones, 1, x, y)
            fd[i] = (fp - fm) / 2e-5
        net.weights = w0
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
    verdict(10, "analytic gradient vs central differences on 20 instances", worst < 1e-4,
            f"max relative error {worst:.1e}")


def test_11_cli_determinism(tmp_path):
    cfg = json.loads((ROOT / "configs" / "quick.json").read_text())
    cfg["strategies"] += [{"name": "finetune"}, {"name": "independent"}]
    path = tmp_path / "det.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        r = subprocess.run([sys.executable, "-m", "acll", "run", str(path), "--out", str(out)],
                           capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    same &= files == sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
    verdict(11, "two CLI runs give byte-identical outputs", same, f"{len(files)} files compared")


def test_12_degenerate_inputs():
    easy = acll_select(lambda t: (1 - t[0], 0.1 + 0.2 * t[0]), 0.1, DualSearchConfig(epsilon=0.5))
    hopeless = acll_select(lambda t: (1 - t[0], 0.3 + 0.1 * t[0]), 0.2, DualSearchConfig(epsilon=0.0))
    ok = easy.theta == (1.0,) and not easy.infeasible
    ok &= hopeless.infeasible and hopeless.theta == (0.0,)
    verdict(12, "loose tolerance gives theta 1, impossible tolerance flags infeasible", ok,
            f"theta {easy.theta[0]}, infeasible theta {hopeless.theta[0]}")
