"""Cross-method explanation disagreement: flagging, region merging, alerting.

Two saliency maps for the same window and target are compared pointwise.
Frames whose absolute difference exceeds a threshold are flagged, nearby
flagged runs are merged across small gaps, and the fraction of the window
covered by merged regions decides whether the case deserves escalation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .explain import ExplanationMap
from .signal_io import WINDOW_FRAMES

DEFAULT_THRESHOLD = 0.5
DEFAULT_MERGE_GAP = 10
DEFAULT_ALERT_PCT = 3.0


class MapMismatch(Exception):
    """The two maps do not describe the same window and target."""


@dataclass(frozen=True)
class DiscrepancyReport:
    """Where and how much two explanations disagree.

    Regions are inclusive [start, end] frame index pairs; merged gap frames
    count toward the covered percentage.
    """

    per_point_delta: np.ndarray
    flagged: np.ndarray
    regions: tuple[tuple[int, int], ...]
    discrepancy_percentage: float
    alert: bool
    threshold: float
    merge_gap: int
    alert_threshold_pct: float

    def to_json_dict(self) -> dict:
        """The fixed five-key wire shape used by prompts and the service."""
        return {
            "percentage": self.discrepancy_percentage,
            "regions": [[int(a), int(b)] for a, b in self.regions],
            "alert": self.alert,
            "threshold": self.threshold,
            "merge_gap": self.merge_gap,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def to_state_dict(self) -> dict:
        """Full lossless form, for case snapshots."""
        return {
            "per_point_delta": [float(v) for v in self.per_point_delta],
            "flagged": [bool(v) for v in self.flagged],
            "regions": [[int(a), int(b)] for a, b in self.regions],
            "discrepancy_percentage": self.discrepancy_percentage,
            "alert": self.alert,
            "threshold": self.threshold,
            "merge_gap": self.merge_gap,
            "alert_threshold_pct": self.alert_threshold_pct,
        }

    @classmethod
    def from_state_dict(cls, obj: dict) -> "DiscrepancyReport":
        return cls(
            per_point_delta=np.asarray(obj["per_point_delta"], dtype=np.float64),
            flagged=np.asarray(obj["flagged"], dtype=bool),
            regions=tuple((int(a), int(b)) for a, b in obj["regions"]),
            discrepancy_percentage=float(obj["discrepancy_percentage"]),
            alert=bool(obj["alert"]),
            threshold=float(obj["threshold"]),
            merge_gap=int(obj["merge_gap"]),
            alert_threshold_pct=float(obj["alert_threshold_pct"]),
        )


def flagged_to_regions(flagged: np.ndarray, merge_gap: int) -> tuple[tuple[int, int], ...]:
    """Collapse a boolean mask into inclusive runs, merging runs whose
    separation is at most merge_gap unflagged frames."""
    idx = np.nonzero(np.asarray(flagged, dtype=bool))[0]
    if idx.size == 0:
        return ()
    regions: list[list[int]] = [[int(idx[0]), int(idx[0])]]
    for i in idx[1:]:
        i = int(i)
        gap = i - regions[-1][1] - 1
        if gap <= merge_gap:
            regions[-1][1] = i
        else:
            regions.append([i, i])
    return tuple((a, b) for a, b in regions)


def compute_discrepancy(
    map_a: ExplanationMap,
    map_b: ExplanationMap,
    threshold: float = DEFAULT_THRESHOLD,
    merge_gap: int = DEFAULT_MERGE_GAP,
    alert_threshold_pct: float = DEFAULT_ALERT_PCT,
) -> DiscrepancyReport:
    """Compare two maps of the same window; symmetric in its two arguments.

    A frame is flagged when |a - b| is strictly above the threshold. The
    covered percentage is 100 * (frames inside merged regions) / 1000, and
    the alert fires when it is strictly above alert_threshold_pct.
    """
    if map_a.values.shape != map_b.values.shape:
        raise MapMismatch(f"map lengths differ: {map_a.values.shape} vs {map_b.values.shape}")
    if map_a.target_class != map_b.target_class:
        raise MapMismatch(
            f"maps explain different classes: {map_a.target_class.label}"
            f" vs {map_b.target_class.label}"
        )
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if merge_gap < 0:
        raise ValueError("merge_gap must be non-negative")

    delta = np.abs(map_a.values - map_b.values)
    flagged = delta > threshold
    regions = flagged_to_regions(flagged, merge_gap)
    covered = sum(b - a + 1 for a, b in regions)
    pct = 100.0 * covered / delta.shape[0]
    return DiscrepancyReport(
        per_point_delta=delta,
        flagged=flagged,
        regions=regions,
        discrepancy_percentage=pct,
        alert=pct > alert_threshold_pct,
        threshold=threshold,
        merge_gap=merge_gap,
        alert_threshold_pct=alert_threshold_pct,
    )


def should_alert(report: DiscrepancyReport,
                 alert_threshold_pct: float = DEFAULT_ALERT_PCT) -> bool:
    """Escalate iff the covered percentage strictly exceeds the threshold."""
    return report.discrepancy_percentage > alert_threshold_pct


def discrepancy_summary(
    outcomes: list[tuple[DiscrepancyReport, bool]]
) -> tuple[float, float]:
    """Mean discrepancy percentage over (correctly, incorrectly) classified
    windows. Raises ValueError when either group is empty."""
    correct = [r.discrepancy_percentage for r, ok in outcomes if ok]
    wrong = [r.discrepancy_percentage for r, ok in outcomes if not ok]
    if not correct or not wrong:
        raise ValueError("need at least one correct and one incorrect outcome")
    return float(np.mean(correct)), float(np.mean(wrong))
