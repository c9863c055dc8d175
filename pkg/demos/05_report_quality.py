"""Score generated clinical narratives without a human in the loop.

Three measurements run over every adjudication transcript: two classic
readability formulas (computed from whitespace words, terminator sentences,
and vowel-group syllables), numeric grounding (every number quoted in the
narrative must exist in the case evidence), and decision accounting over a
finished evaluation sweep (how often contested decisions landed on the true
label).
"""

from gaitcontest.severity import Severity
from gaitcontest.textmetrics import (
    CaseOutcome,
    EvaluationSet,
    adjudication_confusion,
    clinical_grounding,
    extract_numbers,
    flesch_kincaid_grade,
    flesch_reading_ease,
    grounding_from_text,
    severity_correction_accuracy,
    text_stats,
)

PLAIN = ("The gait is slow. Stride time rose to 1.31 seconds. "
         "Stance holds 62.5 percent of the cycle.")
DENSE = ("Observed spatiotemporal asymmetries, specifically prolongation of "
         "the stride interval to 1.31 seconds accompanied by disproportionate "
         "stance-phase occupancy of 62.5 percent, substantiate the "
         "classification.")


def main() -> None:
    for name, text in (("plain", PLAIN), ("dense", DENSE)):
        stats = text_stats(text)
        print(f"{name}: {stats.words} words, {stats.sentences} sentences, "
              f"{stats.syllables} syllables")
        print(f"  reading ease {flesch_reading_ease(text):6.2f}   "
              f"grade level {flesch_kincaid_grade(text):5.2f}")

    evidence = "stride 1.31 s, stance 62.5%"
    faithful = PLAIN
    drifted = "Stride time rose to 1.45 seconds. Stance holds 62.5 percent."
    print(f"\nevidence numbers: {sorted(extract_numbers(evidence))}")
    print(f"grounding of the faithful narrative: "
          f"{grounding_from_text(evidence, faithful):.1f}%")
    print(f"grounding after a hallucinated 1.45: "
          f"{grounding_from_text(evidence, drifted):.1f}%")

    h, s2, s25 = Severity.HEALTHY, Severity.STAGE_2, Severity.STAGE_2_5
    rows = [
        # (truth, first prediction, decision after contest)
        (h, h, h), (s2, s2, s2), (s25, s25, s25),   # model right, kept
        (h, s2, h), (s2, s25, s2),                  # model wrong, corrected
        (h, s2, s2), (s25, s2, s2),                 # model wrong, retained
        (s2, h, s25),                               # overturned, still wrong
    ]
    cases = [CaseOutcome(f"case-{i:03d}", truth, first, final, was_contested=True)
             for i, (truth, first, final) in enumerate(rows)]
    sweep = EvaluationSet(tuple(cases))
    print(f"\nover {len(rows)} finished cases: {adjudication_confusion(sweep)}")
    print(f"correction accuracy on the model's errors: "
          f"{severity_correction_accuracy(sweep):.1f}%")


if __name__ == "__main__":
    main()
