"""Human-centered scoring of model and adjudicator output.

Covers readability of justification text (reading ease and grade level),
numeric grounding of generated text against the evidence it was given,
decision-flip accounting, and the per-run CSV report that binds them
together.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

from .severity import Severity


class DegenerateText(Exception):
    """No words or no sentences; the readability formulas are undefined."""


class NoBaselineErrors(Exception):
    """Correction accuracy is undefined when the baseline made no errors."""


_VOWELS = frozenset("aeiouy")
_SENTENCE_RE = re.compile(r"[.!?]+")
_DECIMAL_POINT_RE = re.compile(r"(?<=\d)\.(?=\d)")
_NUMBER_RE = re.compile(
    r"(?<![\w.])[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?%?|(?<![\w.])[-+]?\.\d+%?"
)


def count_syllables(word: str) -> int:
    """Heuristic syllables: vowel groups (aeiouy), minus a silent trailing
    'e' unless the word ends in consonant+'le'; at least 1 per word."""
    letters = "".join(ch for ch in word.lower() if ch.isalpha())
    if not letters:
        return 1
    groups = 0
    prev_vowel = False
    for ch in letters:
        is_vowel = ch in _VOWELS
        if is_vowel and not prev_vowel:
            groups += 1
        prev_vowel = is_vowel
    if (
        groups > 1
        and letters.endswith("e")
        and not (
            len(letters) >= 3
            and letters.endswith("le")
            and letters[-3] not in _VOWELS
        )
    ):
        groups -= 1
    return max(groups, 1)


@dataclass(frozen=True)
class TextStats:
    words: int
    sentences: int
    syllables: int


def text_stats(text: str) -> TextStats:
    """Count words, sentences, and syllables.

    A word is any whitespace token containing at least one alphanumeric
    character. Sentences are runs of '.', '!', or '?' that terminate at
    least one word; text with words but no terminator counts as one
    sentence.
    """
    tokens = [t for t in text.split() if any(ch.isalnum() for ch in t)]
    words = len(tokens)
    # decimal points are not sentence terminators
    guarded = _DECIMAL_POINT_RE.sub("\x00", text)
    sentences = sum(
        1 for chunk in _SENTENCE_RE.split(guarded) if any(ch.isalnum() for ch in chunk)
    )
    if words and sentences == 0:
        sentences = 1
    syllables = sum(count_syllables(t) for t in tokens)
    return TextStats(words=words, sentences=sentences, syllables=syllables)


def flesch_reading_ease(text: str | TextStats) -> float:
    """206.835 - 1.015 * words/sentence - 84.6 * syllables/word."""
    stats = text if isinstance(text, TextStats) else text_stats(text)
    if stats.words == 0 or stats.sentences == 0:
        raise DegenerateText("reading ease needs at least one word and one sentence")
    return 206.835 - 1.015 * (stats.words / stats.sentences) - 84.6 * (
        stats.syllables / stats.words
    )


def flesch_kincaid_grade(text: str | TextStats) -> float:
    """0.39 * words/sentence + 11.8 * syllables/word - 15.59."""
    stats = text if isinstance(text, TextStats) else text_stats(text)
    if stats.words == 0 or stats.sentences == 0:
        raise DegenerateText("grade level needs at least one word and one sentence")
    return 0.39 * (stats.words / stats.sentences) + 11.8 * (
        stats.syllables / stats.words
    ) - 15.59


def extract_numbers(text: str) -> Counter:
    """Multiset of numeric values in the text.

    Handles optional sign, decimals, thousands separators, and a trailing
    percent sign; values are canonicalized by float parsing, so '65.1%'
    and '65.10' collide."""
    values: Counter = Counter()
    for match in _NUMBER_RE.finditer(text):
        token = match.group(0).rstrip("%").replace(",", "")
        values[float(token)] += 1
    return values


def render_numbers(values: Counter) -> str:
    """Canonical text form of a multiset; extract_numbers round-trips it."""
    parts = []
    for v in sorted(values):
        parts.extend([repr(v)] * values[v])
    return " ".join(parts)


def clinical_grounding(evidence: Counter | Iterable[float],
                       generated: Counter | Iterable[float]) -> float:
    """Percentage of evidence numbers that reappear in the generated text.

    Multiset semantics: each evidence occurrence must be matched by its own
    generated occurrence. An empty evidence set scores 100."""
    ev = evidence if isinstance(evidence, Counter) else Counter(evidence)
    gen = generated if isinstance(generated, Counter) else Counter(generated)
    total = sum(ev.values())
    if total == 0:
        return 100.0
    matched = sum(min(n, gen[v]) for v, n in ev.items())
    return 100.0 * matched / total


def grounding_from_text(evidence_text: str, generated_text: str) -> float:
    return clinical_grounding(extract_numbers(evidence_text), extract_numbers(generated_text))


@dataclass(frozen=True)
class CaseOutcome:
    """Final disposition of one case for accuracy accounting."""

    case_id: str
    true_label: Severity
    baseline_prediction: Severity
    final_decision: Severity
    was_contested: bool = False


@dataclass(frozen=True)
class EvaluationSet:
    cases: tuple[CaseOutcome, ...]

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(self.cases))

    def baseline_errors(self) -> tuple[CaseOutcome, ...]:
        return tuple(c for c in self.cases if c.baseline_prediction != c.true_label)


def severity_correction_accuracy(eval_set: EvaluationSet) -> float:
    """Of the cases the classifier got wrong, the percentage whose final
    decision lands on the true label."""
    errors = eval_set.baseline_errors()
    if not errors:
        raise NoBaselineErrors("the baseline classifier made no errors")
    corrected = sum(1 for c in errors if c.final_decision == c.true_label)
    return 100.0 * corrected / len(errors)


def adjudication_confusion(eval_set: EvaluationSet) -> dict[str, int]:
    """Counts of retained/overturned decisions split by baseline correctness.

    retain   := final decision equals the baseline prediction
    correct  := the baseline prediction equals the true label
    """
    counts = {"retain_correct": 0, "retain_incorrect": 0,
              "overturn_correct": 0, "overturn_incorrect": 0}
    for c in eval_set.cases:
        retained = c.final_decision == c.baseline_prediction
        correct = c.baseline_prediction == c.true_label
        if retained:
            key = "retain_correct" if correct else "retain_incorrect"
        else:
            key = "overturn_correct" if correct else "overturn_incorrect"
        counts[key] += 1
    return counts


REPORT_COLUMNS = (
    "run",
    "fre_mean",
    "fkgl_mean",
    "cg_mean_pct",
    "sca_pct",
    "retain_correct",
    "retain_incorrect",
    "overturn_correct",
    "overturn_incorrect",
    "mean_rt_s",
    "mean_ot_tokens",
)


def run_report_row(
    run: str,
    justifications: Sequence[str],
    grounding_pairs: Sequence[tuple[str, str]],
    eval_set: EvaluationSet,
    response_times_s: Sequence[float],
    output_tokens: Sequence[int],
) -> dict:
    """Aggregate one adjudication run into the standard report row.

    grounding_pairs are (evidence text, generated text) per case. SCA is
    None when the baseline made no errors, rendered as an empty CSV cell.
    """
    fre = [flesch_reading_ease(t) for t in justifications]
    fkgl = [flesch_kincaid_grade(t) for t in justifications]
    cg = [grounding_from_text(ev, gen) for ev, gen in grounding_pairs]
    try:
        sca = severity_correction_accuracy(eval_set)
    except NoBaselineErrors:
        sca = None
    confusion = adjudication_confusion(eval_set)
    row = {
        "run": run,
        "fre_mean": _mean(fre),
        "fkgl_mean": _mean(fkgl),
        "cg_mean_pct": _mean(cg),
        "sca_pct": sca,
        "mean_rt_s": _mean(list(response_times_s)),
        "mean_ot_tokens": _mean(list(output_tokens)),
    }
    row.update(confusion)
    return row


def _mean(values: Sequence[float]) -> float | None:
    if not values:
        return None
    return float(sum(values)) / len(values)


def write_report_csv(rows: Sequence[dict], dest: str | Path | IO[str]) -> None:
    """One row per run with the fixed column set; None becomes empty."""
    own = isinstance(dest, (str, Path))
    fh: IO[str] = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        writer = csv.DictWriter(fh, fieldnames=list(REPORT_COLUMNS))
        writer.writeheader()
        for row in rows:
            clean = {k: ("" if row.get(k) is None else row.get(k)) for k in REPORT_COLUMNS}
            writer.writerow(clean)
    finally:
        if own:
            fh.close()
