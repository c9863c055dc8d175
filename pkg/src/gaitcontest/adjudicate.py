"""The contest-and-justify lifecycle around one classified window.

A case record moves Predicted -> UnderReview -> (Contested -> Justified)* ->
Finalized, with every mutation sealed into the case's hash-chained audit
trail. Adjudication renders the clinical prompt, queries a language-model
backend with bounded retries, parses the mandated decision label out of the
free-form justification, and books the outcome.
"""

from __future__ import annotations

import enum
import math
import re
import time
import uuid
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Sequence

from .audit import AuditEntry, append_entry, utc_now_iso, verify_entries
from .llm import BackendError, BackendResponse, LLMBackend
from .severity import Severity
from .signal_io import GaitMetrics
from .nn.network import Prediction
from .xmed import DiscrepancyReport

PROMPT_ASSET = "adjudication_prompt_v1.txt"
DEFAULT_ACTOR_MODEL = "adjudicator"


class BackendUnavailable(Exception):
    """All retry attempts against the language-model backend failed."""


class DecisionParseFailure(Exception):
    """The response carried no recognizable severity label."""


class NoDecisionFound(DecisionParseFailure):
    pass


class AlreadyFinalized(Exception):
    """Finalized records reject every further mutation."""


class InvalidStateTransition(Exception):
    pass


class ContestationKind(enum.Enum):
    FACTUAL_ERROR = "Factual Error"
    NORMATIVE_CONFLICT = "Normative Conflict"
    REASONING_FLAW = "Reasoning Flaw"


@dataclass(frozen=True)
class Contestation:
    """A typed clinician challenge to the model's assessment."""

    kind: ContestationKind
    free_text: str
    author: str
    timestamp: str = field(default_factory=utc_now_iso)

    def __post_init__(self):
        if not self.free_text.strip():
            raise ValueError("contestation free_text must be non-empty")

    def to_dict(self) -> dict:
        return {"kind": self.kind.name, "free_text": self.free_text,
                "author": self.author, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, obj: dict) -> "Contestation":
        return cls(ContestationKind[obj["kind"]], obj["free_text"],
                   obj["author"], obj["timestamp"])


@dataclass(frozen=True)
class PromptContext:
    """Everything the prompt exposes about one case."""

    predicted_class: Severity
    confidence: float
    gait_metrics: GaitMetrics | None
    discrepancy_percentage: float
    regions: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        if not math.isfinite(self.discrepancy_percentage):
            raise ValueError("discrepancy percentage must be finite")
        for a, b in self.regions:
            if not (0 <= a <= b <= 999):
                raise ValueError(f"region [{a}, {b}] outside [0, 999]")


@dataclass(frozen=True)
class AdjudicationResult:
    final_class: Severity
    justification_text: str
    response_time_s: float
    output_tokens: int
    overturned: bool
    tokens_approximate: bool = False
    attempts: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "final_class": self.final_class.label,
            "justification_text": self.justification_text,
            "response_time_s": self.response_time_s,
            "output_tokens": self.output_tokens,
            "overturned": self.overturned,
            "tokens_approximate": self.tokens_approximate,
            "attempts": list(self.attempts),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AdjudicationResult":
        return cls(
            final_class=Severity.from_label(obj["final_class"]),
            justification_text=obj["justification_text"],
            response_time_s=float(obj["response_time_s"]),
            output_tokens=int(obj["output_tokens"]),
            overturned=bool(obj["overturned"]),
            tokens_approximate=bool(obj["tokens_approximate"]),
            attempts=tuple(obj.get("attempts", ())),
        )


@dataclass
class DialogueTurn:
    system_message: str
    user_message: str
    response_text: str
    result: AdjudicationResult
    timestamp: str = field(default_factory=utc_now_iso)

    def to_dict(self) -> dict:
        return {
            "system_message": self.system_message,
            "user_message": self.user_message,
            "response_text": self.response_text,
            "result": self.result.to_dict(),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DialogueTurn":
        return cls(obj["system_message"], obj["user_message"], obj["response_text"],
                   AdjudicationResult.from_dict(obj["result"]), obj["timestamp"])


class CaseState(enum.Enum):
    PREDICTED = "Predicted"
    UNDER_REVIEW = "UnderReview"
    CONTESTED = "Contested"
    JUSTIFIED = "Justified"
    FINALIZED_ACCEPTED = "Finalized(accepted)"
    FINALIZED_OVERRIDDEN = "Finalized(overridden)"


FINAL_STATES = (CaseState.FINALIZED_ACCEPTED, CaseState.FINALIZED_OVERRIDDEN)


@dataclass
class CaseRecord:
    """One window's journey through prediction, review, and contest."""

    case_id: str
    window_ref: dict
    prediction: Prediction
    discrepancy: DiscrepancyReport
    gait_metrics: GaitMetrics | None = None
    explanations: dict | None = None
    state: CaseState = CaseState.PREDICTED
    dialogue: list[DialogueTurn] = field(default_factory=list)
    contestations: list[Contestation] = field(default_factory=list)
    final_label: Severity | None = None
    audit_entries: list[AuditEntry] = field(default_factory=list)

    @property
    def finalized(self) -> bool:
        return self.state in FINAL_STATES

    def last_adjudicated_class(self) -> Severity | None:
        if not self.dialogue:
            return None
        return self.dialogue[-1].result.final_class

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "window_ref": self.window_ref,
            "prediction": self.prediction.to_dict(),
            "discrepancy": self.discrepancy.to_state_dict(),
            "gait_metrics": None if self.gait_metrics is None else {
                "mean_stride_time_s": self.gait_metrics.mean_stride_time_s,
                "stance_percentage": self.gait_metrics.stance_percentage,
                "swing_percentage": self.gait_metrics.swing_percentage,
                "n_strides": self.gait_metrics.n_strides,
            },
            "explanations": self.explanations,
            "state": self.state.value,
            "dialogue": [t.to_dict() for t in self.dialogue],
            "contestations": [c.to_dict() for c in self.contestations],
            "final_label": None if self.final_label is None else self.final_label.label,
            "audit_entries": [
                {"case_id": e.case_id, "seq": e.seq, "timestamp": e.timestamp,
                 "actor": e.actor, "action": e.action, "payload": e.payload,
                 "prev_hash": e.prev_hash, "hash": e.hash}
                for e in self.audit_entries
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CaseRecord":
        pred = obj["prediction"]
        prediction = Prediction.from_logits(pred["logits"])
        gm = obj.get("gait_metrics")
        metrics = None if gm is None else GaitMetrics(
            mean_stride_time_s=gm["mean_stride_time_s"],
            stance_percentage=gm["stance_percentage"],
            swing_percentage=gm["swing_percentage"],
            n_strides=gm["n_strides"],
        )
        record = cls(
            case_id=obj["case_id"],
            window_ref=obj["window_ref"],
            prediction=prediction,
            discrepancy=DiscrepancyReport.from_state_dict(obj["discrepancy"]),
            gait_metrics=metrics,
            explanations=obj.get("explanations"),
            state=CaseState(obj["state"]),
            dialogue=[DialogueTurn.from_dict(t) for t in obj["dialogue"]],
            contestations=[Contestation.from_dict(c) for c in obj["contestations"]],
            final_label=(None if obj["final_label"] is None
                         else Severity.from_label(obj["final_label"])),
        )
        record.audit_entries = [
            AuditEntry(case_id=e["case_id"], seq=e["seq"], timestamp=e["timestamp"],
                       actor=e["actor"], action=e["action"], payload=e["payload"],
                       prev_hash=e["prev_hash"], hash=e["hash"])
            for e in obj["audit_entries"]
        ]
        return record


def _load_template() -> dict[str, str]:
    text = resources.files("gaitcontest.assets").joinpath(PROMPT_ASSET).read_text("utf-8")
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        marker = line.strip()
        if marker in ("[SYSTEM]", "[USER]", "[CONTESTATION]"):
            current = sections.setdefault(marker[1:-1], [])
            continue
        if current is None:
            continue  # preamble comments
        current.append(line)
    return {k: "\n".join(v).strip("\n") for k, v in sections.items()}


_TEMPLATE_CACHE: dict[str, str] | None = None


def _template() -> dict[str, str]:
    global _TEMPLATE_CACHE
    if _TEMPLATE_CACHE is None:
        _TEMPLATE_CACHE = _load_template()
    return _TEMPLATE_CACHE


def _format_regions(regions: Sequence[tuple[int, int]]) -> str:
    if not regions:
        return "none"
    return ", ".join(f"[{a}, {b}]" for a, b in regions)


def render_prompt(ctx: PromptContext,
                  contestation: Contestation | None = None) -> tuple[str, str]:
    """Fill the versioned prompt asset from the case context.

    Deterministic pure templating: the system message is emitted as stored;
    the user message carries the prediction, gait metrics, and explanation
    discrepancy. A contestation appends the labeled clinician challenge and
    the finalization request.
    """
    tpl = _template()
    if ctx.gait_metrics is not None:
        stride = f"{ctx.gait_metrics.mean_stride_time_s:.3f}s"
        swing = f"{ctx.gait_metrics.swing_percentage:.1f}%"
        stance = f"{ctx.gait_metrics.stance_percentage:.1f}%"
    else:
        stride = swing = stance = "unavailable"
    user = tpl["USER"].format(**{
        "class": ctx.predicted_class.label,
        "confidence": f"{ctx.confidence:.3f}",
        "mean_stride_time": stride,
        "swing_percentage": swing,
        "stance_percentage": stance,
        "discrepancy_percentage": f"{ctx.discrepancy_percentage:.1f}",
        "regions": _format_regions(ctx.regions),
    })
    if contestation is not None:
        block = tpl["CONTESTATION"].format(
            kind=contestation.kind.value, text=contestation.free_text
        )
        user = f"{user}\n\n{block}"
    return tpl["SYSTEM"], user


# longest label first so "Stage 2.5" wins over "Stage 2" at the same offset;
# lookaheads keep "Stage 2.75" and "Stage 25" from matching a shorter label
_DECISION_RE = re.compile(
    r"(stage\s*2\.5(?!\d)|stage\s*2(?!\.?\d)|stage\s*3(?!\.?\d)|healthy)",
    re.IGNORECASE,
)


def parse_final_decision(response_text: str) -> Severity:
    """The last severity label mentioned in the text, longest match first."""
    matches = list(_DECISION_RE.finditer(response_text))
    if not matches:
        raise NoDecisionFound("response contains no severity label")
    return Severity.from_label(matches[-1].group(0))


def new_case_id() -> str:
    return f"case-{uuid.uuid4().hex[:12]}"


def create_case(
    window_ref: dict,
    prediction: Prediction,
    discrepancy: DiscrepancyReport,
    gait_metrics: GaitMetrics | None = None,
    explanations: dict | None = None,
    case_id: str | None = None,
    actor: str = "system",
) -> CaseRecord:
    """Open a record in Predicted state with its genesis audit entry."""
    record = CaseRecord(
        case_id=case_id or new_case_id(),
        window_ref=window_ref,
        prediction=prediction,
        discrepancy=discrepancy,
        gait_metrics=gait_metrics,
        explanations=explanations,
    )
    append_entry(record.audit_entries, record.case_id, actor, "created", {
        "window_ref": window_ref,
        "predicted_class": prediction.predicted_class.label,
        "confidence": prediction.confidence,
        "discrepancy_percentage": discrepancy.discrepancy_percentage,
        "alert": discrepancy.alert,
    })
    return record


def _require_state(record: CaseRecord, allowed: tuple[CaseState, ...], op: str) -> None:
    if record.finalized:
        raise AlreadyFinalized(f"case {record.case_id} is finalized; {op} rejected")
    if record.state not in allowed:
        names = ", ".join(s.value for s in allowed)
        raise InvalidStateTransition(
            f"{op} requires state in ({names}), case {record.case_id} is {record.state.value}"
        )


def open_review(record: CaseRecord, actor: str = "system") -> CaseRecord:
    """Predicted -> UnderReview; the case becomes eligible for adjudication."""
    _require_state(record, (CaseState.PREDICTED,), "open_review")
    record.state = CaseState.UNDER_REVIEW
    append_entry(record.audit_entries, record.case_id, actor, "review_opened", {})
    return record


def contest(record: CaseRecord, contestation: Contestation) -> CaseRecord:
    """Register clinician dissent; UnderReview or Justified -> Contested."""
    _require_state(record, (CaseState.UNDER_REVIEW, CaseState.JUSTIFIED), "contest")
    record.contestations.append(contestation)
    record.state = CaseState.CONTESTED
    append_entry(record.audit_entries, record.case_id, contestation.author, "contested",
                 {"kind": contestation.kind.value, "free_text": contestation.free_text})
    return record


def prompt_context_for(record: CaseRecord) -> PromptContext:
    return PromptContext(
        predicted_class=record.prediction.predicted_class,
        confidence=record.prediction.confidence,
        gait_metrics=record.gait_metrics,
        discrepancy_percentage=record.discrepancy.discrepancy_percentage,
        regions=tuple(record.discrepancy.regions),
    )


def adjudicate(
    record: CaseRecord,
    backend: LLMBackend,
    contestation: Contestation | None = None,
    actor: str = DEFAULT_ACTOR_MODEL,
    temperature: float = 0.0,
    max_attempts: int = 3,
    initial_backoff_s: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
    clock: Callable[[], float] = time.perf_counter,
) -> AdjudicationResult:
    """Run one adjudication turn against the backend.

    Retries transport failures with exponential backoff (1 s, 2 s, ...),
    booking every attempt in the audit chain. A response without a parseable
    decision leaves the state unchanged and raises DecisionParseFailure.
    """
    _require_state(record, (CaseState.UNDER_REVIEW, CaseState.CONTESTED), "adjudicate")
    if contestation is None and record.state == CaseState.CONTESTED:
        contestation = record.contestations[-1]
    system, user = render_prompt(prompt_context_for(record), contestation)
    messages = [{"role": "system", "content": system},
                {"role": "user", "content": user}]

    attempts: list[dict] = []
    response: BackendResponse | None = None
    elapsed = 0.0
    for attempt in range(1, max_attempts + 1):
        started = clock()
        try:
            response = backend.complete(messages, temperature=temperature)
            elapsed = clock() - started
            attempts.append({"attempt": attempt, "ok": True})
            break
        except BackendError as exc:
            attempts.append({"attempt": attempt, "ok": False, "error": str(exc)})
            append_entry(record.audit_entries, record.case_id, actor, "backend_retry",
                         {"attempt": attempt, "error": str(exc)})
            if attempt < max_attempts:
                sleep(initial_backoff_s * (2 ** (attempt - 1)))
    if response is None:
        append_entry(record.audit_entries, record.case_id, actor, "adjudication_failed",
                     {"error": "backend unavailable", "attempts": attempts})
        raise BackendUnavailable(f"backend failed after {max_attempts} attempts")

    try:
        final_class = parse_final_decision(response.text)
    except NoDecisionFound:
        append_entry(record.audit_entries, record.case_id, actor, "adjudication_failed",
                     {"error": "no decision label in response", "attempts": attempts})
        raise

    if response.output_tokens is not None:
        tokens, approximate = response.output_tokens, False
    else:
        tokens, approximate = math.ceil(len(response.text) / 4), True

    result = AdjudicationResult(
        final_class=final_class,
        justification_text=response.text,
        response_time_s=elapsed,
        output_tokens=tokens,
        overturned=final_class != record.prediction.predicted_class,
        tokens_approximate=approximate,
        attempts=tuple(attempts),
    )
    record.dialogue.append(DialogueTurn(system, user, response.text, result))
    record.state = CaseState.JUSTIFIED
    append_entry(record.audit_entries, record.case_id, actor, "adjudicated", {
        "final_class": final_class.label,
        "overturned": result.overturned,
        "response_time_s": result.response_time_s,
        "output_tokens": result.output_tokens,
        "tokens_approximate": result.tokens_approximate,
        "attempts": attempts,
    })
    return result


def finalize(record: CaseRecord, actor: str, decision: str,
             override_label: Severity | None = None) -> CaseRecord:
    """Freeze a Justified case: accept the adjudicated class or override it."""
    _require_state(record, (CaseState.JUSTIFIED,), "finalize")
    if decision == "accept":
        record.final_label = record.last_adjudicated_class()
        record.state = CaseState.FINALIZED_ACCEPTED
    elif decision == "override":
        if override_label is None:
            raise ValueError("override requires a label")
        record.final_label = override_label
        record.state = CaseState.FINALIZED_OVERRIDDEN
    else:
        raise ValueError(f"decision must be 'accept' or 'override', got {decision!r}")
    append_entry(record.audit_entries, record.case_id, actor, "finalized", {
        "decision": decision,
        "final_label": record.final_label.label,
    })
    return record


def verify_audit(record: CaseRecord) -> bool:
    """Recompute the case's hash chain; a zero-entry chain is valid."""
    return verify_entries(record.audit_entries)
