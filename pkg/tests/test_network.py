"""Network composition, prediction shape, and evaluation arithmetic."""

import numpy as np
import pytest

from gaitcontest.nn.evaluate import (
    classification_report,
    confusion_matrix,
    evaluate_windows,
    format_report,
    predict_batch,
    standardize_window,
    weighted_f1,
    windows_to_arrays,
)
from gaitcontest.nn.layers import (
    ShapeMismatch,
    conv1d,
    dense,
    flatten,
    maxpool1d,
    relu,
)
from gaitcontest.nn.network import (
    Network,
    Prediction,
    make_default_network,
    softmax,
)
from gaitcontest.severity import Severity
from gaitcontest.signal_io import WINDOW_FRAMES, Window
from gaitcontest.synth import make_separable_windows


class TestPrediction:
    def test_from_logits_matches_manual_softmax(self):
        logits = np.array([0.0, 3.0, 1.0, 0.0])
        pred = Prediction.from_logits(logits)
        manual = np.exp(logits) / np.exp(logits).sum()
        assert pred.probabilities == pytest.approx(manual)
        assert pred.probabilities.sum() == pytest.approx(1.0)
        assert pred.predicted_class is Severity.STAGE_2
        assert pred.confidence == pytest.approx(manual[1])

    def test_softmax_is_overflow_safe(self):
        probs = softmax(np.array([1000.0, 0.0, 0.0, 0.0]))
        assert np.all(np.isfinite(probs))
        assert probs[0] == pytest.approx(1.0)

    def test_to_dict_uses_display_labels(self):
        d = Prediction.from_logits(np.array([0.0, 0.0, 5.0, 0.0])).to_dict()
        assert d["predicted_class"] == "Stage 2.5"
        assert len(d["logits"]) == 4
        assert all(isinstance(v, float) for v in d["probabilities"])


class TestComposition:
    def test_head_must_be_four_way_dense(self):
        with pytest.raises(ValueError):
            Network([])
        with pytest.raises(ValueError):
            Network([flatten(), dense(WINDOW_FRAMES, 3)])
        with pytest.raises(ValueError):
            Network([conv1d(1, 2, 3), relu()], input_shape=None)

    def test_default_geometry_composes_to_four_logits(self):
        net = make_default_network()
        shapes = net.out_shapes((1, WINDOW_FRAMES))
        assert shapes[-1] == (4,)
        # five pool halvings: 1000 -> 31 frames at 64 channels
        assert net.conv_layer_indices() == [0, 3, 6, 9, 12]
        assert shapes[net.conv_layer_indices()[-1]] == (64, 62)

    def test_mismatched_stack_rejected_at_construction(self):
        with pytest.raises(ShapeMismatch):
            Network([conv1d(1, 2, 3), flatten(), dense(999, 4)])

    def test_seed_determinism(self):
        a = make_default_network(seed=7)
        b = make_default_network(seed=7)
        c = make_default_network(seed=8)
        flat_a = [arr for _, _, arr in a.parameters()]
        flat_b = [arr for _, _, arr in b.parameters()]
        flat_c = [arr for _, _, arr in c.parameters()]
        assert all(np.array_equal(x, y) for x, y in zip(flat_a, flat_b))
        assert any(not np.array_equal(x, y) for x, y in zip(flat_a, flat_c))

    def test_forward_requires_one_dimensional_window(self):
        net = make_default_network(conv_channels=(2,), dense_units=(4,))
        with pytest.raises(ShapeMismatch):
            net.forward(np.zeros((2, WINDOW_FRAMES)))
        with pytest.raises(ShapeMismatch):
            net.forward_batch(np.zeros(WINDOW_FRAMES))
        with pytest.raises(ShapeMismatch):
            net.forward_batch(np.zeros((1, 1, WINDOW_FRAMES - 1)))

    def test_forward_accepts_window_objects(self):
        net = make_default_network(conv_channels=(2,), dense_units=(4,))
        w = Window("s", 0, np.random.default_rng(0).standard_normal(WINDOW_FRAMES))
        from_window, _ = net.forward(w)
        from_array, _ = net.forward(w.values)
        assert np.array_equal(from_window.logits, from_array.logits)

    def test_get_state_returns_copies(self):
        net = make_default_network(conv_channels=(2,), dense_units=(4,))
        state = net.get_state()
        before = net.layers[0].params["weight"].copy()
        state[0]["weight"] += 100.0
        assert np.array_equal(net.layers[0].params["weight"], before)

    def test_set_state_bumps_version(self):
        net = make_default_network(conv_channels=(2,), dense_units=(4,))
        v = net.version
        net.set_state(net.get_state())
        assert net.version == v + 1


class TestConfusionArithmetic:
    def test_hand_worked_matrix(self):
        y_true = [0] * 6 + [1] * 5 + [3] * 5
        y_pred = [0] * 5 + [1] + [0, 0, 1, 1, 1] + [3, 3, 3, 3, 2]
        cm = confusion_matrix(y_true, y_pred)
        assert cm.tolist() == [
            [5, 1, 0, 0],
            [2, 3, 0, 0],
            [0, 0, 0, 0],
            [0, 0, 1, 4],
        ]
        report = classification_report(cm)
        assert report.accuracy == pytest.approx(12 / 16)
        c0 = report.per_class[Severity.HEALTHY]
        assert c0.precision == pytest.approx(5 / 7)
        assert c0.recall == pytest.approx(5 / 6)
        assert c0.f1 == pytest.approx(2 * (5 / 7) * (5 / 6) / (5 / 7 + 5 / 6))
        c2 = report.per_class[Severity.STAGE_2_5]
        assert (c2.precision, c2.recall, c2.f1, c2.support) == (None, None, None, 0)
        c3 = report.per_class[Severity.STAGE_3]
        assert c3.precision == pytest.approx(1.0)
        assert c3.recall == pytest.approx(4 / 5)
        f1s = [report.per_class[Severity.HEALTHY].f1,
               report.per_class[Severity.STAGE_2].f1,
               report.per_class[Severity.STAGE_3].f1]
        assert report.macro_f1 == pytest.approx(sum(f1s) / 3)
        assert report.weighted_f1 == pytest.approx(
            (f1s[0] * 6 + f1s[1] * 5 + f1s[2] * 5) / 16)
        assert weighted_f1(y_true, y_pred) == pytest.approx(report.weighted_f1)

    def test_zero_predicted_class_gets_zero_precision(self):
        cm = confusion_matrix([0, 0, 1], [1, 1, 1])
        report = classification_report(cm)
        c0 = report.per_class[Severity.HEALTHY]
        assert (c0.precision, c0.recall, c0.f1) == (0.0, 0.0, 0.0)

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            classification_report(np.zeros((4, 4), dtype=np.int64))

    def test_format_report_text(self):
        report = classification_report(confusion_matrix([0, 1, 3], [0, 1, 3]))
        text = format_report(report)
        assert "accuracy" in text
        assert "Stage 2.5" in text
        assert "n/a" in text  # the absent class


class TestBatchHelpers:
    def test_predict_batch_chunking_is_invisible(self):
        net = make_default_network(conv_channels=(2,), dense_units=(4,))
        x = np.random.default_rng(1).standard_normal((5, 1, WINDOW_FRAMES))
        whole, _ = net.forward_batch(x)
        chunked = predict_batch(net, x, chunk=2)
        np.testing.assert_allclose(chunked, whole, rtol=1e-12, atol=1e-12)

    def test_windows_to_arrays_labels(self):
        windows = make_separable_windows(n_per_class=1, windows_per_subject=1)
        x, y = windows_to_arrays(windows)
        assert x.shape == (4, 1, WINDOW_FRAMES)
        assert y.tolist() == [0, 1, 2, 3]
        unlabeled = windows + [Window("u", 0, np.zeros(WINDOW_FRAMES))]
        _, none_y = windows_to_arrays(unlabeled)
        assert none_y is None

    def test_standardize_window_matches_batch_path(self):
        windows = make_separable_windows(n_per_class=2, windows_per_subject=1,
                                         seed=4)
        batch, _ = windows_to_arrays(windows, standardize=True)
        for i, w in enumerate(windows):
            single = standardize_window(w)
            assert np.array_equal(single.values, batch[i, 0])
            assert single.values.mean() == pytest.approx(0.0, abs=1e-12)
            assert single.values.std() == pytest.approx(1.0)
            assert single.source_id == w.source_id
            assert single.label is w.label

    def test_standardize_constant_window_is_zeros(self):
        w = Window("c", 0, np.full(WINDOW_FRAMES, 5.0))
        assert np.array_equal(standardize_window(w).values,
                              np.zeros(WINDOW_FRAMES))

    def test_evaluate_windows_agrees_with_parts(self):
        net = make_default_network(conv_channels=(2,), dense_units=(4,), seed=2)
        windows = make_separable_windows(n_per_class=3, windows_per_subject=1,
                                         seed=6)
        report, y, y_pred = evaluate_windows(net, windows)
        x, want_y = windows_to_arrays(windows)
        assert np.array_equal(y, want_y)
        assert np.array_equal(y_pred, predict_batch(net, x).argmax(axis=1))
        assert report.total == len(windows)
        with pytest.raises(ValueError):
            evaluate_windows(net, [Window("u", 0, np.zeros(WINDOW_FRAMES))])
