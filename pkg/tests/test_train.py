"""Loss arithmetic, optimizer updates, the fit loop, and nested CV search."""

import dataclasses
import importlib

import numpy as np
import pytest

from gaitcontest.nn.evaluate import (
    classification_report,
    confusion_matrix,
    evaluate_windows,
)
from gaitcontest.nn.network import make_default_network
from gaitcontest.nn.train import (
    Adam,
    DivergedTraining,
    EpochStats,
    InsufficientData,
    TrainConfig,
    cross_entropy,
    grid_search,
    train,
)
from gaitcontest.signal_io import WINDOW_FRAMES, Window
from gaitcontest.synth import make_separable_windows


def tiny_net(dropout_rate=0.0, seed=0):
    return make_default_network(dropout_rate=dropout_rate, seed=seed,
                                conv_channels=(2,), kernel_size=3,
                                dense_units=(4,))


def split_by_suffix(windows):
    train_w = [w for w in windows if w.source_id.endswith("-0")]
    val_w = [w for w in windows if not w.source_id.endswith("-0")]
    return train_w, val_w


class TestCrossEntropy:
    def test_uniform_logits_hand_values(self):
        loss, grad = cross_entropy(np.zeros((1, 4)), np.array([2]))
        assert loss == pytest.approx(np.log(4.0))
        assert grad[0] == pytest.approx([0.25, 0.25, -0.75, 0.25])

    def test_batch_mean_divides_gradient(self):
        logits = np.array([[1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0]])
        loss, grad = cross_entropy(logits, np.array([0, 3]))
        assert loss == pytest.approx(np.log(4.0))
        assert grad[0] == pytest.approx(np.array([-0.75, 0.25, 0.25, 0.25]) / 2)
        assert grad[1] == pytest.approx(np.array([0.25, 0.25, 0.25, -0.75]) / 2)

    def test_extreme_logits_stay_finite(self):
        loss, grad = cross_entropy(np.array([[1000.0, 0.0, 0.0, 0.0]]),
                                   np.array([0]))
        assert np.isfinite(loss) and loss < 1e-12
        assert np.all(np.isfinite(grad))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        logits = rng.standard_normal((3, 4))
        labels = rng.integers(0, 4, size=3)
        _, grad = cross_entropy(logits, labels)
        step = 1e-6
        for i in range(3):
            for j in range(4):
                bumped = logits.copy()
                bumped[i, j] += step
                up, _ = cross_entropy(bumped, labels)
                bumped[i, j] -= 2 * step
                down, _ = cross_entropy(bumped, labels)
                assert grad[i, j] == pytest.approx((up - down) / (2 * step),
                                                   abs=1e-5)


class TestAdam:
    def test_constant_gradient_moves_by_lr_sign(self):
        net = tiny_net()
        cfg = TrainConfig(learning_rate=0.01)
        opt = Adam(net, cfg)
        dense_idx = len(net.layers) - 1
        w0 = net.layers[dense_idx].params["weight"].copy()
        grads = [{name: np.zeros_like(arr) for name, arr in layer.params.items()}
                 for layer in net.layers]
        grads[dense_idx]["weight"] = np.ones_like(w0)

        opt.step(grads)
        # bias-corrected m_hat = g, v_hat = g*g, so the step is lr*g/(|g|+eps)
        expected_step = cfg.learning_rate * 1.0 / (1.0 + cfg.epsilon)
        np.testing.assert_allclose(net.layers[dense_idx].params["weight"],
                                   w0 - expected_step, rtol=0, atol=1e-15)

        opt.step(grads)
        np.testing.assert_allclose(net.layers[dense_idx].params["weight"],
                                   w0 - 2 * expected_step, rtol=0, atol=1e-14)
        assert opt.t == 2

    def test_negative_gradient_moves_up(self):
        net = tiny_net()
        cfg = TrainConfig(learning_rate=0.05)
        opt = Adam(net, cfg)
        b0 = net.layers[-1].params["bias"].copy()
        grads = [{name: np.zeros_like(arr) for name, arr in layer.params.items()}
                 for layer in net.layers]
        grads[len(net.layers) - 1]["bias"] = np.full_like(b0, -2.0)
        opt.step(grads)
        expected_step = cfg.learning_rate * 2.0 / (2.0 + cfg.epsilon)
        np.testing.assert_allclose(net.layers[-1].params["bias"],
                                   b0 + expected_step, rtol=0, atol=1e-15)

    def test_step_bumps_network_version(self):
        net = tiny_net()
        opt = Adam(net, TrainConfig())
        v = net.version
        grads = [{name: np.zeros_like(arr) for name, arr in layer.params.items()}
                 for layer in net.layers]
        opt.step(grads)
        assert net.version == v + 1


class TestConfigValidation:
    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=-1e-3)
        with pytest.raises(ValueError):
            TrainConfig(dropout_rate=1.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)


class TestTrainLoop:
    def test_learns_separable_data_perfectly(self):
        # fully deterministic recipe: verified to reach 100% on both folds
        windows = make_separable_windows(n_per_class=8, windows_per_subject=4,
                                         seed=2)
        train_w, val_w = split_by_suffix(windows)
        net = make_default_network(dropout_rate=0.0, seed=0,
                                   conv_channels=(2,), kernel_size=3,
                                   dense_units=(8,))
        cfg = TrainConfig(learning_rate=3e-3, dropout_rate=0.0, epochs=60,
                          batch_size=4, seed=1, early_stopping_patience=None)
        net, history = train(net, train_w, val_w, cfg)
        assert history[-1].train_accuracy == 1.0
        assert history[-1].val_accuracy == 1.0
        report, _, _ = evaluate_windows(net, val_w)
        assert report.accuracy == 1.0

    def test_bitwise_deterministic(self):
        windows = make_separable_windows(n_per_class=4, windows_per_subject=2,
                                         seed=9)
        train_w, val_w = split_by_suffix(windows)
        cfg = TrainConfig(learning_rate=1e-3, dropout_rate=0.3, epochs=3,
                          batch_size=4, seed=5, early_stopping_patience=None)

        def run():
            net, history = train(tiny_net(dropout_rate=0.3, seed=1),
                                 train_w, val_w, cfg)
            return net.get_state(), history

        state_a, hist_a = run()
        state_b, hist_b = run()
        assert hist_a == hist_b
        for la, lb in zip(state_a, state_b):
            assert set(la) == set(lb)
            for name in la:
                assert np.array_equal(la[name], lb[name])

    def test_early_stop_restores_best_epoch(self):
        windows = make_separable_windows(n_per_class=4, windows_per_subject=2,
                                         seed=3)
        train_w, val_w = split_by_suffix(windows)
        # shuffled validation labels make val F1 pure noise, so the loop
        # must stop on patience and roll back to its best epoch
        rng = np.random.default_rng(0)
        val_w = [dataclasses.replace(w, label=type(w.label)(int(k)))
                 for w, k in zip(val_w, rng.integers(0, 4, len(val_w)))]
        cfg = TrainConfig(learning_rate=3e-3, dropout_rate=0.0, epochs=30,
                          batch_size=8, seed=7, early_stopping_patience=2)
        net, history = train(tiny_net(seed=4), train_w, val_w, cfg)

        best = max(h.val_weighted_f1 for h in history)
        best_epoch = min(h.epoch for h in history if h.val_weighted_f1 == best)
        assert history[-1].epoch == best_epoch + 2  # stopped, not exhausted
        report, _, _ = evaluate_windows(net, val_w)
        assert report.weighted_f1 == pytest.approx(best, rel=1e-12)

    def test_restored_state_matches_truncated_run(self):
        windows = make_separable_windows(n_per_class=4, windows_per_subject=2,
                                         seed=3)
        train_w, val_w = split_by_suffix(windows)
        rng = np.random.default_rng(0)
        val_w = [dataclasses.replace(w, label=type(w.label)(int(k)))
                 for w, k in zip(val_w, rng.integers(0, 4, len(val_w)))]
        cfg = TrainConfig(learning_rate=3e-3, dropout_rate=0.0, epochs=30,
                          batch_size=8, seed=7, early_stopping_patience=2)
        net, history = train(tiny_net(seed=4), train_w, val_w, cfg)
        best = max(h.val_weighted_f1 for h in history)
        best_epoch = min(h.epoch for h in history if h.val_weighted_f1 == best)

        short_cfg = dataclasses.replace(cfg, epochs=best_epoch,
                                        early_stopping_patience=None)
        short_net, _ = train(tiny_net(seed=4), train_w, val_w, short_cfg)
        for la, lb in zip(net.get_state(), short_net.get_state()):
            for name in la:
                assert np.array_equal(la[name], lb[name])

    def test_diverged_parameters_raise(self):
        windows = make_separable_windows(n_per_class=4, windows_per_subject=2,
                                         seed=1)
        train_w, val_w = split_by_suffix(windows)
        net = tiny_net()
        net.layers[-1].params["weight"][:] = 1e308
        net.bump_version()
        with np.errstate(all="ignore"), pytest.raises(DivergedTraining):
            train(net, train_w, val_w, TrainConfig(epochs=2, batch_size=4))

    def test_empty_sets_rejected(self):
        windows = make_separable_windows(n_per_class=1, windows_per_subject=1)
        with pytest.raises(InsufficientData):
            train(tiny_net(), [], windows)
        with pytest.raises(InsufficientData):
            train(tiny_net(), windows, [])

    def test_unlabeled_windows_rejected(self):
        labeled = make_separable_windows(n_per_class=1, windows_per_subject=1)
        bare = [Window("u", 0, np.zeros(WINDOW_FRAMES))]
        with pytest.raises(ValueError):
            train(tiny_net(), labeled + bare, labeled)


# the nn package re-exports these names, so resolve the real modules
train_module = importlib.import_module("gaitcontest.nn.train")
evaluate_module = importlib.import_module("gaitcontest.nn.evaluate")


def fake_train_factory(calls):
    def fake_train(net, train_w, val_w, cfg):
        calls.append(({w.source_id for w in train_w},
                      {w.source_id for w in val_w}, cfg))
        return net, [EpochStats(1, 1.0, 0.5, 1.0, 0.5, 0.5)]
    return fake_train


def fake_evaluate(net, windows):
    y = np.array([w.label.value for w in windows])
    return classification_report(confusion_matrix(y, y)), y, y


class TestGridSearch:
    GRID = {"dropout_rate": [0.0, 0.3]}

    def test_fold_bookkeeping_with_spy(self, monkeypatch):
        windows = make_separable_windows(n_per_class=3, windows_per_subject=1,
                                         seed=3)
        subjects = {w.source_id for w in windows}
        assert len(subjects) == 12
        calls = []
        monkeypatch.setattr(train_module, "train", fake_train_factory(calls))
        monkeypatch.setattr(evaluate_module, "evaluate_windows", fake_evaluate)
        result = grid_search(windows, self.GRID, TrainConfig(epochs=1),
                             outer_folds=3, inner_folds=2, seed=0)

        # 3 outer folds x 2 configs x 2 inner folds, plus 3 refits of the winner
        assert len(calls) == 15
        for train_subj, val_subj, _ in calls:
            assert train_subj and val_subj
            assert not train_subj & val_subj

        folds = result.outer_subject_folds
        assert len(folds) == 3
        flat = [s for fold in folds for s in fold]
        assert len(flat) == len(set(flat))
        assert set(flat) == subjects
        for k, held in enumerate(folds):
            fit_subj, monitor_subj, _ = calls[12 + k]
            assert not (fit_subj | monitor_subj) & set(held)

        assert result.best_config in result.configs
        assert len(result.configs) == 2
        assert len(result.inner_scores) == 2
        assert all(len(row) == 3 for row in result.inner_scores)
        assert result.outer_scores == (1.0, 1.0, 1.0)

    def test_deterministic_partition(self, monkeypatch):
        windows = make_separable_windows(n_per_class=3, windows_per_subject=1,
                                         seed=3)
        monkeypatch.setattr(train_module, "train", fake_train_factory([]))
        monkeypatch.setattr(evaluate_module, "evaluate_windows", fake_evaluate)
        kwargs = dict(outer_folds=3, inner_folds=2, seed=4)
        a = grid_search(windows, self.GRID, TrainConfig(epochs=1), **kwargs)
        b = grid_search(windows, self.GRID, TrainConfig(epochs=1), **kwargs)
        assert a.outer_subject_folds == b.outer_subject_folds
        assert a.best_config == b.best_config

    def test_end_to_end_on_separable_subjects(self):
        windows = make_separable_windows(n_per_class=3, windows_per_subject=2,
                                         seed=5)
        base = TrainConfig(learning_rate=3e-3, epochs=2, batch_size=8, seed=1,
                           early_stopping_patience=None)
        result = grid_search(
            windows, self.GRID, base, outer_folds=3, inner_folds=2, seed=0,
            network_factory=lambda cfg: tiny_net(cfg.dropout_rate, cfg.seed))
        assert result.best_config.dropout_rate in (0.0, 0.3)
        assert all(0.0 <= s <= 1.0 for row in result.inner_scores for s in row)
        assert all(0.0 <= s <= 1.0 for s in result.outer_scores)

    def test_too_few_subjects(self):
        windows = make_separable_windows(n_per_class=1, windows_per_subject=1)
        with pytest.raises(InsufficientData):
            grid_search(windows, self.GRID, outer_folds=5)
        with pytest.raises(InsufficientData):
            grid_search(windows, self.GRID, outer_folds=2, inner_folds=4)

    def test_empty_grid_values_rejected(self):
        windows = make_separable_windows(n_per_class=2, windows_per_subject=1)
        with pytest.raises(ValueError):
            grid_search(windows, {"dropout_rate": []})
