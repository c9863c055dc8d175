"""Severity classes shared by the classifier, the adjudicator, and the reports."""

from __future__ import annotations

import enum


class Severity(enum.Enum):
    """Four-way gait severity outcome, ordered from healthy to most affected."""

    HEALTHY = 0
    STAGE_2 = 1
    STAGE_2_5 = 2
    STAGE_3 = 3

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_code(cls, code: int) -> "Severity":
        return cls(code)

    @classmethod
    def from_label(cls, text: str) -> "Severity":
        """Parse a display label, tolerating case, spaces, and underscores."""
        key = "".join(ch for ch in text.lower() if ch not in " _-")
        try:
            return _COMPACT[key]
        except KeyError:
            raise ValueError(f"unknown severity label: {text!r}") from None


_LABELS = {
    Severity.HEALTHY: "Healthy",
    Severity.STAGE_2: "Stage 2",
    Severity.STAGE_2_5: "Stage 2.5",
    Severity.STAGE_3: "Stage 3",
}

# compact spellings accepted by from_label; "stage25" covers "Stage2_5"
_COMPACT = {
    "healthy": Severity.HEALTHY,
    "stage2": Severity.STAGE_2,
    "stage2.5": Severity.STAGE_2_5,
    "stage25": Severity.STAGE_2_5,
    "stage3": Severity.STAGE_3,
}

ALL_CLASSES = (Severity.HEALTHY, Severity.STAGE_2, Severity.STAGE_2_5, Severity.STAGE_3)
N_CLASSES = len(ALL_CLASSES)
