import numpy as np
import pytest

from acll import (DualSearchConfig, InvalidSpecError, Strategy, TrainConfig, add_head,
                  generate_dataset, init_network, make_task_specs, new_ownership, run_sequence,
                  sgd_train, train_task, zero_one_risk)
from acll.lifelong import _prune_and_finetune, evaluate_all
from acll.net import derive_seed
from acll.taskmask import register_task

from conftest import preset_run


def _small_specs(names=("blobs", "rings"), n=200, seed=0):
    datasets = [(f"{k}-{i}", generate_dataset(k, 2 + i, n, 0.1, seed + i))
                for i, k in enumerate(names)]
    return make_task_specs(datasets, seed, TrainConfig(epochs=15), TrainConfig(epochs=4))


SMALL_DIMS = (2, 16, 16)


def test_strategy_labels_and_validation():
    assert Strategy.acll(0.02).label == "acll_eps0.02"
    assert Strategy.fixed(0.5).label == "fixed_0.5"
    with pytest.raises(InvalidSpecError):
        Strategy("bogus")
    with pytest.raises(InvalidSpecError):
        Strategy.fixed(1.5)
    with pytest.raises(InvalidSpecError):
        Strategy("acll")


def test_independent_equals_plain_training():
    specs = _small_specs()
    rep = run_sequence(specs, Strategy("independent"), 3, SMALL_DIMS)
    for k, (task, rec) in enumerate(zip(specs, rep.tasks), start=1):
        net = init_network(SMALL_DIMS, derive_seed(3, k))
        add_head(net, 1, task.data.class_count)
        ones = np.ones(net.weights.size)
        sgd_train(net, ones, 1, task.data.train, task.train_cfg)
        assert rec.reference_risk == zero_one_risk(net, ones, 1, task.data.val).risk
        assert rec.theta == (0.0,) and rec.acc_end_of_sequence == rec.acc_post_task


def test_fixed_zero_leaves_nothing_free():
    rep = run_sequence(_small_specs(), Strategy.fixed(0.0), 0, SMALL_DIMS)
    assert rep.owned_fraction == [1.0, 1.0]
    assert rep.tasks[1].retained_count == 0 and rep.tasks[1].size == 0.0


def test_fixed_half_capacity_arithmetic():
    rep = run_sequence(_small_specs(), Strategy.fixed(0.5), 0, SMALL_DIMS)
    n_shared = 2 * 16 + 16 * 16
    free = [round((1 - f) * n_shared) for f in rep.owned_fraction]
    assert abs(free[0] - n_shared / 2) <= 1 and abs(free[1] - n_shared / 4) <= 1


def test_single_task_sequence():
    rep = run_sequence(_small_specs(("blobs",)), Strategy.acll(0.02), 0, SMALL_DIMS)
    assert len(rep.tasks) == 1
    assert rep.tasks[0].acc_end_of_sequence == rep.tasks[0].acc_post_task


def test_mask_strategies_do_not_forget():
    specs = _small_specs(("blobs", "rings", "spirals"))
    for strategy in (Strategy.fixed(0.3), Strategy.acll(0.05)):
        rep = run_sequence(specs, strategy, 1, SMALL_DIMS)
        for rec in rep.tasks:
            assert np.array_equal(rec.test_predictions_post, rec.test_predictions_end)


def test_train_task_respects_frozen_weights():
    specs = _small_specs()
    net = init_network(SMALL_DIMS, 0)
    own = new_ownership(net.weights.size)
    net, own, _ = train_task(net, own, specs[0], Strategy.fixed(0.5))
    frozen = own.owner == 1
    w1 = net.weights[:frozen.size][frozen].copy()
    net, own, _ = train_task(net, own, specs[1], Strategy.fixed(0.5))
    assert np.array_equal(net.weights[:frozen.size][frozen], w1)
    assert evaluate_all(net, own, specs) == evaluate_all(net, own, specs)


def test_acll_on_blobs_prunes_heavily():
    specs = make_task_specs([("blobs", generate_dataset("blobs", 2, 2000, 0.3, 0))], 0)
    net = init_network([2, 64, 64], 0)
    own = new_ownership(net.weights.size)
    twin, twin_own = net.copy(), own.copy()
    net, own, rec = train_task(net, own, specs[0], Strategy.acll(0.02), DualSearchConfig(), 0)
    assert rec.theta[0] >= 0.75

    # oracle: replay the same training, prune at 0.75 directly, check feasibility
    add_head(twin, 1, 2)
    register_task(twin_own, twin.head_range(1))
    ones = np.ones(twin.weights.size)
    sgd_train(twin, ones, 1, specs[0].data.train, specs[0].train_cfg)
    assert zero_one_risk(twin, ones, 1, specs[0].data.val).risk == rec.reference_risk
    cand, _, _ = _prune_and_finetune(twin, twin_own, 1, (0.75,), specs[0])
    assert zero_one_risk(cand, ones, 1, specs[0].data.val).risk <= rec.reference_risk + 0.02


def test_acll_val_risk_is_the_selection_measurement():
    rep, _, _ = preset_run("SIMPLE_HARD", "acll")
    for rec in rep.tasks:
        assert rec.val_risk == rec.cache.get(rec.theta).risk


def test_finetune_forgets():
    rep, _, _ = preset_run("SIMPLE_HARD", "finetune")
    first = rep.tasks[0]
    assert first.acc_end_of_sequence < first.acc_post_task


def test_report_serialises(tmp_path):
    rep = run_sequence(_small_specs(), Strategy.acll(0.02), 0, SMALL_DIMS)
    d = rep.to_dict()
    assert d["avg_over_tasks"] == pytest.approx(np.mean([t["acc_end_of_sequence"] for t in d["tasks"]]))
    assert rep.to_json() == rep.to_json()
    assert all(len(t["trail"]) >= 1 for t in d["tasks"])


def test_empty_sequence_rejected():
    with pytest.raises(InvalidSpecError):
        run_sequence([], Strategy("finetune"))
