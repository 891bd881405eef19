import functools

import numpy as np
import pytest

from acll import (DualSearchConfig, Strategy, init_network, add_head, make_task_specs,
                  preset_tasks, run_sequence)

PRESET_N = 2000
ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def preset_run(preset: str, kind: str, param: float | None = None, seed: int = 0):
    """Run a shipped sequence once per session; returns (report, specs, seconds)."""
    import time

    specs = make_task_specs(preset_tasks(preset, PRESET_N, seed), seed)
    if kind == "acll":
        strategy = Strategy.acll(0.02 if param is None else param)
    elif kind == "fixed":
        strategy = Strategy.fixed(param)
    else:
        strategy = Strategy(kind)
    t0 = time.perf_counter()
    report = run_sequence(specs, strategy, seed, dual_cfg=DualSearchConfig())
    return report, specs, time.perf_counter() - t0


def tiny_net(dims=(2, 5, 4), n_classes=3, seed=0):
    net = init_network(list(dims), seed)
    add_head(net, 1, n_classes)
    return net


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
