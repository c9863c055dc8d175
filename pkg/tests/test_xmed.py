"""Discrepancy flagging checked against a paint-and-scan oracle.

The oracle is built differently from the production code: flagged frames are
painted into a boolean array, gaps no wider than merge_gap are filled in, and
regions are read back as edges of the closed mask. Results must match the
incremental run-merging implementation exactly.
"""

import time

import numpy as np
import pytest

from gaitcontest.explain import ExplanationMap
from gaitcontest.severity import Severity
from gaitcontest.signal_io import WINDOW_FRAMES
from gaitcontest.xmed import (
    DiscrepancyReport,
    MapMismatch,
    compute_discrepancy,
    discrepancy_summary,
    flagged_to_regions,
    should_alert,
)

THRESHOLDS = (0.1, 0.5, 0.9)
GAPS = (0, 5, 10)


def oracle(delta, threshold, merge_gap):
    """Paint, close small gaps, read regions off mask edges."""
    painted = delta > threshold
    idx = np.nonzero(painted)[0]
    closed = painted.copy()
    for prev, nxt in zip(idx[:-1], idx[1:]):
        gap = int(nxt) - int(prev) - 1
        if 0 < gap <= merge_gap:
            closed[prev + 1:nxt] = True
    padded = np.concatenate(([False], closed, [False]))
    edges = np.nonzero(padded[1:] != padded[:-1])[0]
    regions = tuple(
        (int(s), int(e) - 1) for s, e in zip(edges[0::2], edges[1::2])
    )
    pct = 100.0 * int(closed.sum()) / delta.shape[0]
    return regions, pct


def make_map(values, target=Severity.HEALTHY, method="gradcam"):
    return ExplanationMap(method=method, target_class=target, values=values)


def mask_to_maps(mask, hi=1.0):
    """Map pair whose delta is exactly hi on masked frames, 0 elsewhere."""
    a = np.where(mask, hi, 0.0)
    return make_map(a), make_map(np.zeros(WINDOW_FRAMES))


class TestOracleEquivalence:
    def test_1000_random_pairs_all_settings_exact(self):
        rng = np.random.default_rng(42)
        started = time.monotonic()
        for _ in range(1000):
            a = rng.random(WINDOW_FRAMES)
            b = rng.random(WINDOW_FRAMES)
            delta = np.abs(a - b)
            ma, mb = make_map(a), make_map(b)
            for threshold in THRESHOLDS:
                for gap in GAPS:
                    rep = compute_discrepancy(ma, mb, threshold, gap)
                    want_regions, want_pct = oracle(delta, threshold, gap)
                    assert rep.regions == want_regions
                    assert rep.discrepancy_percentage == want_pct
                    assert rep.alert == (want_pct > rep.alert_threshold_pct)
        assert time.monotonic() - started < 30.0

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(3)
        a, b = rng.random(WINDOW_FRAMES), rng.random(WINDOW_FRAMES)
        fwd = compute_discrepancy(make_map(a), make_map(b))
        rev = compute_discrepancy(make_map(b), make_map(a))
        assert fwd.regions == rev.regions
        assert fwd.discrepancy_percentage == rev.discrepancy_percentage


class TestEdgeCases:
    def test_identical_maps_produce_nothing(self):
        v = np.linspace(0, 1, WINDOW_FRAMES)
        rep = compute_discrepancy(make_map(v), make_map(v))
        assert rep.regions == ()
        assert rep.discrepancy_percentage == 0.0
        assert rep.alert is False

    def test_everything_flagged_is_one_region(self):
        ma, mb = mask_to_maps(np.ones(WINDOW_FRAMES, dtype=bool))
        rep = compute_discrepancy(ma, mb, threshold=0.5)
        assert rep.regions == ((0, WINDOW_FRAMES - 1),)
        assert rep.discrepancy_percentage == 100.0
        assert rep.alert is True

    def test_delta_equal_to_threshold_is_not_flagged(self):
        a = np.full(WINDOW_FRAMES, 0.75)
        b = np.full(WINDOW_FRAMES, 0.25)
        rep = compute_discrepancy(make_map(a), make_map(b), threshold=0.5)
        assert rep.regions == ()

    def test_gap_exactly_merge_gap_merges(self):
        mask = np.zeros(WINDOW_FRAMES, dtype=bool)
        mask[100] = True
        mask[106] = True  # five unflagged frames between
        ma, mb = mask_to_maps(mask)
        rep = compute_discrepancy(ma, mb, threshold=0.5, merge_gap=5)
        assert rep.regions == ((100, 106),)
        assert rep.discrepancy_percentage == 100.0 * 7 / WINDOW_FRAMES

    def test_gap_one_past_merge_gap_splits(self):
        mask = np.zeros(WINDOW_FRAMES, dtype=bool)
        mask[100] = True
        mask[107] = True
        ma, mb = mask_to_maps(mask)
        rep = compute_discrepancy(ma, mb, threshold=0.5, merge_gap=5)
        assert rep.regions == ((100, 100), (107, 107))

    def test_merge_gap_zero_keeps_adjacent_runs_joined(self):
        mask = np.zeros(WINDOW_FRAMES, dtype=bool)
        mask[10:13] = True
        mask[13:15] = True  # contiguous, no gap at all
        mask[20] = True
        ma, mb = mask_to_maps(mask)
        rep = compute_discrepancy(ma, mb, threshold=0.5, merge_gap=0)
        assert rep.regions == ((10, 14), (20, 20))

    def test_alert_boundary_is_strict(self):
        mask = np.zeros(WINDOW_FRAMES, dtype=bool)
        mask[:30] = True  # exactly 3.0 percent
        ma, mb = mask_to_maps(mask)
        rep = compute_discrepancy(ma, mb, threshold=0.5, merge_gap=0)
        assert rep.discrepancy_percentage == 3.0
        assert rep.alert is False
        mask[30] = True
        ma, mb = mask_to_maps(mask)
        rep = compute_discrepancy(ma, mb, threshold=0.5, merge_gap=0)
        assert rep.alert is True

    def test_region_at_window_tail(self):
        mask = np.zeros(WINDOW_FRAMES, dtype=bool)
        mask[-4:] = True
        ma, mb = mask_to_maps(mask)
        rep = compute_discrepancy(ma, mb, threshold=0.5)
        assert rep.regions == ((WINDOW_FRAMES - 4, WINDOW_FRAMES - 1),)


class TestValidation:
    def test_target_mismatch_rejected(self):
        a = make_map(np.zeros(WINDOW_FRAMES), target=Severity.HEALTHY)
        b = make_map(np.zeros(WINDOW_FRAMES), target=Severity.STAGE_3)
        with pytest.raises(MapMismatch):
            compute_discrepancy(a, b)

    def test_negative_settings_rejected(self):
        a = make_map(np.zeros(WINDOW_FRAMES))
        with pytest.raises(ValueError):
            compute_discrepancy(a, a, threshold=-0.1)
        with pytest.raises(ValueError):
            compute_discrepancy(a, a, merge_gap=-1)


class TestProperties:
    def test_monotone_in_threshold_and_gap(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            ma = make_map(rng.random(WINDOW_FRAMES))
            mb = make_map(rng.random(WINDOW_FRAMES))
            by_threshold = [
                compute_discrepancy(ma, mb, t, 5).discrepancy_percentage
                for t in (0.05, 0.2, 0.4, 0.6, 0.8)
            ]
            assert all(x >= y for x, y in zip(by_threshold, by_threshold[1:]))
            by_gap = [
                compute_discrepancy(ma, mb, 0.5, g).discrepancy_percentage
                for g in (0, 2, 5, 10, 20)
            ]
            assert all(x <= y for x, y in zip(by_gap, by_gap[1:]))
            for pct in by_threshold + by_gap:
                assert 0.0 <= pct <= 100.0

    def test_regions_sorted_disjoint_in_bounds(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            ma = make_map(rng.random(WINDOW_FRAMES))
            mb = make_map(rng.random(WINDOW_FRAMES))
            rep = compute_discrepancy(ma, mb, 0.7, 3)
            prev_end = -2
            for a, b in rep.regions:
                assert 0 <= a <= b <= WINDOW_FRAMES - 1
                assert a > prev_end + 1
                prev_end = b

    def test_should_alert_matches_report_flag(self):
        rng = np.random.default_rng(13)
        ma = make_map(rng.random(WINDOW_FRAMES))
        mb = make_map(rng.random(WINDOW_FRAMES))
        rep = compute_discrepancy(ma, mb, 0.6)
        assert should_alert(rep) == rep.alert
        assert should_alert(rep, alert_threshold_pct=101.0) is False


class TestSerialization:
    def test_wire_shape_is_pinned(self):
        rng = np.random.default_rng(14)
        rep = compute_discrepancy(make_map(rng.random(WINDOW_FRAMES)),
                                  make_map(rng.random(WINDOW_FRAMES)))
        wire = rep.to_json_dict()
        assert set(wire) == {"percentage", "regions", "alert",
                             "threshold", "merge_gap"}
        assert wire["percentage"] == rep.discrepancy_percentage
        assert all(isinstance(r, list) and len(r) == 2 for r in wire["regions"])

    def test_state_dict_round_trip(self):
        rng = np.random.default_rng(15)
        rep = compute_discrepancy(make_map(rng.random(WINDOW_FRAMES)),
                                  make_map(rng.random(WINDOW_FRAMES)),
                                  threshold=0.3, merge_gap=7,
                                  alert_threshold_pct=2.0)
        back = DiscrepancyReport.from_state_dict(rep.to_state_dict())
        assert np.array_equal(back.per_point_delta, rep.per_point_delta)
        assert np.array_equal(back.flagged, rep.flagged)
        assert back.regions == rep.regions
        assert back.discrepancy_percentage == rep.discrepancy_percentage
        assert (back.alert, back.threshold, back.merge_gap,
                back.alert_threshold_pct) == (rep.alert, rep.threshold,
                                              rep.merge_gap,
                                              rep.alert_threshold_pct)


class TestFlaggedToRegions:
    def test_hand_cases(self):
        assert flagged_to_regions(np.zeros(10, dtype=bool), 3) == ()
        mask = np.array([1, 1, 0, 0, 1, 0, 0, 0, 0, 1], dtype=bool)
        assert flagged_to_regions(mask, 2) == ((0, 4), (9, 9))
        assert flagged_to_regions(mask, 4) == ((0, 9),)
        assert flagged_to_regions(mask, 0) == ((0, 1), (4, 4), (9, 9))


class TestSummary:
    def test_group_means(self):
        rng = np.random.default_rng(16)
        reports = [
            compute_discrepancy(make_map(rng.random(WINDOW_FRAMES)),
                                make_map(rng.random(WINDOW_FRAMES)))
            for _ in range(6)
        ]
        outcomes = [(r, i % 2 == 0) for i, r in enumerate(reports)]
        mean_ok, mean_bad = discrepancy_summary(outcomes)
        want_ok = np.mean([r.discrepancy_percentage
                           for r, ok in outcomes if ok])
        want_bad = np.mean([r.discrepancy_percentage
                            for r, ok in outcomes if not ok])
        assert mean_ok == pytest.approx(want_ok)
        assert mean_bad == pytest.approx(want_bad)

    def test_empty_group_raises(self):
        rng = np.random.default_rng(17)
        rep = compute_discrepancy(make_map(rng.random(WINDOW_FRAMES)),
                                  make_map(rng.random(WINDOW_FRAMES)))
        with pytest.raises(ValueError):
            discrepancy_summary([(rep, True)])
