"""Walk one case through contest, re-justification, and finalization.

A case starts from a model prediction plus its explanation-disagreement
report. A clinician who distrusts the reasoning files a contestation; the
adjudication backend (scripted here, an HTTP chat model in production)
answers with a justification whose final 'Stage X' label is parsed out.
Every transition appends a hash-chained audit entry, so editing history
after the fact is detectable.
"""

import numpy as np

from gaitcontest.adjudicate import (
    CaseState,
    Contestation,
    ContestationKind,
    adjudicate,
    contest,
    create_case,
    finalize,
    open_review,
    verify_audit,
)
from gaitcontest.audit import verify_log_lines
from gaitcontest.llm import ScriptedBackend
from gaitcontest.nn.network import Prediction
from gaitcontest.signal_io import GaitMetrics
from gaitcontest.xmed import DiscrepancyReport

FIRST_ANSWER = ("The flagged band sits on the loading response, where the "
                "reduced peak force is classic Stage 2. Final decision: Stage 2.")
SECOND_ANSWER = ("The contestation is persuasive: the disagreement region "
                 "overlaps a turning artifact, and the stance asymmetry fits "
                 "the next grade. Final decision: Stage 2.5.")


def main() -> None:
    report = DiscrepancyReport(
        per_point_delta=np.zeros(1000),
        flagged=np.zeros(1000, dtype=bool),
        regions=((400, 455),),
        discrepancy_percentage=5.6,
        alert=True,
        threshold=0.5,
        merge_gap=10,
        alert_threshold_pct=3.0,
    )
    record = create_case(
        window_ref={"subject_id": "demo-07", "window": 2},
        prediction=Prediction.from_logits(np.array([0.1, 2.9, 1.2, 0.2])),
        discrepancy=report,
        gait_metrics=GaitMetrics(1.31, 62.5, 37.5, 9),
    )
    print(f"{record.case_id}: predicted "
          f"{record.prediction.predicted_class.label!r}, "
          f"maps disagree on {report.discrepancy_percentage}% -> "
          f"alert={report.alert}")

    open_review(record)
    backend = ScriptedBackend([FIRST_ANSWER, SECOND_ANSWER])
    result = adjudicate(record, backend)
    print(f"first justification keeps {result.final_class.label!r} "
          f"(overturned={result.overturned})")

    contest(record, Contestation(
        kind=ContestationKind.REASONING_FLAW,
        free_text="The flagged frames coincide with a turn, not steady gait.",
        author="dr-demo",
    ))
    print(f"clinician contests: state={record.state.value}")

    result = adjudicate(record, backend)
    print(f"re-justification decides {result.final_class.label!r} "
          f"(overturned={result.overturned})")

    finalize(record, actor="dr-demo", decision="accept")
    print(f"finalized: state={record.state.value}, "
          f"label={record.final_label.label!r}")

    print(f"\naudit trail ({len(record.audit_entries)} entries):")
    for e in record.audit_entries:
        print(f"  {e.seq}  {e.actor:<22} {e.action}")
    print(f"chain verifies: {verify_audit(record)}")

    lines = [e.to_json() for e in record.audit_entries]
    tampered = lines.copy()
    tampered[3] = tampered[3].replace("contested", "Contested", 1)
    print(f"after flipping one byte in entry 3: "
          f"verifies={verify_log_lines(tampered)}")


if __name__ == "__main__":
    main()
