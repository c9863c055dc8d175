"""When the two explanation methods disagree, say so loudly.

Per-frame disagreement is the absolute difference between the two
normalized maps. Frames above a threshold are flagged, flagged runs
separated by small gaps merge into regions, and the covered share of the
window decides whether the case is escalated for mandatory review. The
inputs here are handcrafted so every step is visible.
"""

import numpy as np

from gaitcontest.explain import ExplanationMap
from gaitcontest.severity import Severity
from gaitcontest.signal_io import WINDOW_FRAMES
from gaitcontest.xmed import compute_discrepancy, discrepancy_summary


def make_map(values):
    return ExplanationMap(method="gradcam", target_class=Severity.STAGE_2,
                          values=values)


def main() -> None:
    # two maps that agree everywhere except two nearby bursts and one
    # isolated frame
    base = np.full(WINDOW_FRAMES, 0.15)
    other = base.copy()
    other[100:130] = 0.95
    other[136:150] = 0.90
    other[600] = 0.80

    report = compute_discrepancy(make_map(base), make_map(other),
                                 threshold=0.5, merge_gap=10)
    print(f"{int(report.flagged.sum())} frames exceed the 0.5 threshold")
    print(f"merged regions (gaps <= 10 close): {report.regions}")
    print(f"coverage {report.discrepancy_percentage:.1f}% of the window; "
          f"alert above {report.alert_threshold_pct:.1f}% -> alert={report.alert}")

    # the same pair with no gap merging keeps the bursts separate
    strict = compute_discrepancy(make_map(base), make_map(other),
                                 threshold=0.5, merge_gap=0)
    print(f"\nwith merge_gap=0 the regions stay apart: {strict.regions}")

    # identical maps never alert
    clean = compute_discrepancy(make_map(base), make_map(base))
    print(f"identical maps: regions={clean.regions}, "
          f"coverage={clean.discrepancy_percentage:.1f}%, alert={clean.alert}")

    # aggregated over a batch, disagreement tracks model mistakes; feed the
    # summary (report, was_correct) pairs and compare the two means
    rng = np.random.default_rng(0)
    outcomes = []
    for i in range(12):
        correct = i % 3 != 0
        a = rng.random(WINDOW_FRAMES) * 0.2
        noise = 0.55 if correct else 0.75
        b = np.clip(a + rng.random(WINDOW_FRAMES) * noise, 0.0, 1.0)
        outcomes.append((compute_discrepancy(make_map(a), make_map(b)), correct))
    mean_correct, mean_wrong = discrepancy_summary(outcomes)
    print(f"\nmean coverage when the model is right: {mean_correct:.1f}%, "
          f"when it is wrong: {mean_wrong:.1f}%")


if __name__ == "__main__":
    main()
