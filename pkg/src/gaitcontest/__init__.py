"""Contestable gait severity classification toolkit.

A numpy 1-D CNN classifies vertical ground-reaction-force windows into four
severity classes; two attribution methods explain each decision, their
disagreement is measured and escalated, and an LLM-backed contest loop lets
clinicians challenge, re-justify, and finalize every case behind a
tamper-evident audit trail.
"""

from . import adjudicate, audit, explain, llm, nn, signal_io, synth, textmetrics, xmed
from .severity import ALL_CLASSES, N_CLASSES, Severity

__version__ = "0.1.0"

__all__ = [
    "ALL_CLASSES",
    "N_CLASSES",
    "Severity",
    "adjudicate",
    "audit",
    "explain",
    "llm",
    "nn",
    "signal_io",
    "synth",
    "textmetrics",
    "xmed",
]
