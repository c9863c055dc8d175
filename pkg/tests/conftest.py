"""Shared fixtures: the planted-feature model is trained once per session
because several suites (saliency localization, discrepancy separation,
acceptance) score the same trained artifact."""

import time
from dataclasses import dataclass, field

import numpy as np
import pytest

from gaitcontest.explain import explanation_pair
from gaitcontest.nn import TrainConfig, evaluate_windows, make_default_network, train
from gaitcontest.signal_io import split_dataset
from gaitcontest.synth import make_pulse_windows
from gaitcontest.xmed import compute_discrepancy

PULSE_DATA_SEED = 7
PULSE_SPLIT_SEED = 11
PULSE_MODEL_SEED = 5
PULSE_FRESH_SEED = 99
PULSE_BAND = (380, 470)


@dataclass
class PlantedModel:
    net: object
    test_accuracy: float
    train_seconds: float
    # per fresh window: (correct, gradcam argmax, lrp argmax, discrepancy pct)
    sweep: list = field(default_factory=list)
    sweep_seconds: float = 0.0

    def correct_rows(self):
        return [r for r in self.sweep if r[0]]

    def localization_rates(self):
        lo, hi = PULSE_BAND
        rows = self.correct_rows()
        cam = np.mean([lo <= r[1] <= hi for r in rows])
        lrp = np.mean([lo <= r[2] <= hi for r in rows])
        both = np.mean([lo <= r[1] <= hi and lo <= r[2] <= hi for r in rows])
        return float(cam), float(lrp), float(both)

    def separation_means(self):
        correct = [r[3] for r in self.sweep if r[0]]
        wrong = [r[3] for r in self.sweep if not r[0]]
        return float(np.mean(correct)), float(np.mean(wrong)), len(wrong)


@pytest.fixture(scope="session")
def planted_model() -> PlantedModel:
    windows = make_pulse_windows(n_per_class=150, seed=PULSE_DATA_SEED)
    train_w, val_w, test_w = split_dataset(windows, seed=PULSE_SPLIT_SEED)
    net = make_default_network(dropout_rate=0.3, seed=PULSE_MODEL_SEED,
                               conv_channels=(16, 32, 32), dense_units=(128, 64))
    config = TrainConfig(learning_rate=5e-4, dropout_rate=0.3, epochs=60,
                         early_stopping_patience=15, seed=PULSE_MODEL_SEED)
    t0 = time.perf_counter()
    net, _ = train(net, train_w, val_w, config)
    train_seconds = time.perf_counter() - t0
    report, _, _ = evaluate_windows(net, test_w)

    fresh = make_pulse_windows(n_per_class=150, seed=PULSE_FRESH_SEED)
    t0 = time.perf_counter()
    sweep = []
    for w in fresh:
        pair = explanation_pair(net, w)
        rep = compute_discrepancy(pair.gradcam, pair.lrp)
        sweep.append((
            pair.prediction.predicted_class == w.label,
            int(np.argmax(pair.gradcam.values)),
            int(np.argmax(pair.lrp.values)),
            rep.discrepancy_percentage,
        ))
    sweep_seconds = time.perf_counter() - t0
    return PlantedModel(net=net, test_accuracy=report.accuracy,
                        train_seconds=train_seconds, sweep=sweep,
                        sweep_seconds=sweep_seconds)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            if outcome == "passed":
                verdict = "PASS"
            elif outcome == "skipped":
                verdict = ("SKIPPED-DATA"
                           if "SKIPPED-DATA" in str(getattr(report, "longrepr", ""))
                           else "SKIP")
            else:
                verdict = "FAIL"
            lines.append(f"{verdict}  {name}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split(None, 1)[1]):
            terminalreporter.write_line(line)
