"""HTTP facade over the library: browse recordings, open prediction cases,
contest them, and adjudicate against a language-model backend.

Persistence is deliberately file-based: the audit trail is a JSONL file with
one fsync per entry, and every case snapshots to its own JSON file after each
mutation, before the response returns. Per-case mutations take a non-blocking
writer lease; a second concurrent writer gets a conflict instead of waiting.
Inference is shared-read and needs no locking.
"""

from __future__ import annotations

import json
import os
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import yaml
from pydantic import BaseModel

from .adjudicate import (
    AdjudicationResult,
    CaseRecord,
    CaseState,
    Contestation,
    ContestationKind,
    adjudicate,
    contest,
    create_case,
    finalize,
    open_review,
)
from .audit import AuditEntry, verify_entries
from .explain import explanation_pair
from .llm import HttpChatBackend, LLMBackend
from .nn import load_checkpoint, standardize_window
from .nn.network import Network
from .severity import Severity
from .signal_io import (
    CHANNEL_NAMES,
    CONTACT_THRESHOLD_N,
    SAMPLE_RATE_HZ,
    WINDOW_FRAMES,
    GaitRecording,
    Window,
    detect_heel_strikes,
    load_dataset,
    segment_windows,
    window_gait_metrics,
)
from .xmed import compute_discrepancy

DEFAULT_LISTEN = "127.0.0.1:8077"


class ConfigError(Exception):
    """The service configuration file is missing, malformed, or inconsistent."""


class NotFound(Exception):
    """Unknown subject, window index, or case id."""


class ModelNotLoaded(Exception):
    """Prediction requested before a checkpoint was configured or loadable."""


class WriterBusy(Exception):
    """Another request holds this case's writer lease."""


@dataclass(frozen=True)
class LLMSettings:
    base_url: str = ""
    model_name: str = "mock"
    api_key_source: str = "GAITCONTEST_API_KEY"
    temperature: float = 0.0


@dataclass(frozen=True)
class XmedSettings:
    threshold: float = 0.5
    merge_gap: int = 10
    alert_pct: float = 3.0

    def __post_init__(self):
        if self.threshold <= 0 or self.alert_pct <= 0:
            raise ConfigError("xmed thresholds must be positive")
        if self.merge_gap < 0:
            raise ConfigError("merge_gap must be non-negative")


@dataclass(frozen=True)
class ServiceConfig:
    data_directory: str
    checkpoint_path: str
    audit_log_path: str
    case_directory: str = ""
    listen_address: str = DEFAULT_LISTEN
    llm: LLMSettings = field(default_factory=LLMSettings)
    xmed: XmedSettings = field(default_factory=XmedSettings)
    auto_adjudicate_on_alert: bool = True
    llm_concurrency: int = 2
    standardize_inputs: bool = True

    def __post_init__(self):
        if self.llm_concurrency < 1:
            raise ConfigError("llm_concurrency must be at least 1")
        if not self.case_directory:
            fallback = str(Path(self.audit_log_path).parent / "cases")
            object.__setattr__(self, "case_directory", fallback)


def load_service_config(path: str | Path) -> ServiceConfig:
    """Parse the YAML config; relative paths resolve against the file's parent."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a YAML mapping")

    base = path.parent

    def resolve(value: str) -> str:
        p = Path(value)
        return str(p if p.is_absolute() else base / p)

    known = {"data_directory", "checkpoint_path", "audit_log_path", "case_directory",
             "listen_address", "llm", "xmed", "auto_adjudicate_on_alert",
             "llm_concurrency", "standardize_inputs"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("data_directory", "checkpoint_path", "audit_log_path"):
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")

    try:
        llm = LLMSettings(**raw.get("llm", {}))
        xmed = XmedSettings(**raw.get("xmed", {}))
        config = ServiceConfig(
            data_directory=resolve(raw["data_directory"]),
            checkpoint_path=resolve(raw["checkpoint_path"]),
            audit_log_path=resolve(raw["audit_log_path"]),
            case_directory=resolve(raw["case_directory"]) if raw.get("case_directory") else "",
            listen_address=raw.get("listen_address", DEFAULT_LISTEN),
            llm=llm,
            xmed=xmed,
            auto_adjudicate_on_alert=bool(raw.get("auto_adjudicate_on_alert", True)),
            llm_concurrency=int(raw.get("llm_concurrency", 2)),
            standardize_inputs=bool(raw.get("standardize_inputs", True)),
        )
    except TypeError as exc:
        raise ConfigError(f"bad config field: {exc}")
    if not Path(config.data_directory).is_dir():
        raise ConfigError(f"data_directory does not exist: {config.data_directory}")
    return config


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class CaseStore:
    """One JSON snapshot file per case, written atomically."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def save(self, record: CaseRecord) -> None:
        payload = json.dumps(record.to_dict(), sort_keys=True, indent=1)
        _atomic_write(self.directory / f"{record.case_id}.json", payload)

    def load_all(self) -> dict[str, CaseRecord]:
        records = {}
        for path in sorted(self.directory.glob("case-*.json")):
            record = CaseRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
            records[record.case_id] = record
        return records


class _DurableAudit:
    """Single serialized appender over the JSONL audit file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append_batch(self, entries: list[AuditEntry]) -> None:
        if not entries:
            return
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                for entry in entries:
                    fh.write(entry.to_json())
                    fh.write("\n")
                fh.flush()
                os.fsync(fh.fileno())

    def read_lines(self) -> list[str]:
        if not self.path.exists():
            return []
        with self.path.open("r", encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh if line.strip()]


@dataclass
class _SubjectData:
    recording: GaitRecording
    windows: list[Window]


class GaitService:
    """All endpoint behavior, independent of the HTTP framework."""

    def __init__(self, config: ServiceConfig,
                 backend: LLMBackend | None = None,
                 network: Network | None = None):
        self.config = config
        self.subjects: dict[str, _SubjectData] = {}
        data_dir = Path(config.data_directory)
        if (data_dir / "manifest.csv").exists():
            for rec in load_dataset(data_dir):
                self.subjects[rec.subject_id] = _SubjectData(rec, segment_windows(rec))

        self.network = network
        if self.network is None and Path(config.checkpoint_path).exists():
            self.network = load_checkpoint(config.checkpoint_path)

        self.backend = backend if backend is not None else HttpChatBackend(
            base_url=config.llm.base_url,
            model=config.llm.model_name,
            api_key_env=config.llm.api_key_source,
        )
        self.audit = _DurableAudit(config.audit_log_path)
        self.store = CaseStore(config.case_directory)
        self.cases: dict[str, CaseRecord] = self.store.load_all()
        self._persisted_entries = {cid: len(rec.audit_entries)
                                   for cid, rec in self.cases.items()}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._llm_slots = threading.BoundedSemaphore(config.llm_concurrency)

    # -- lease and persistence plumbing ------------------------------------

    def _lock_for(self, case_id: str) -> threading.Lock:
        with self._locks_guard:
            if case_id not in self._locks:
                self._locks[case_id] = threading.Lock()
            return self._locks[case_id]

    @contextmanager
    def case_lease(self, case_id: str) -> Iterator[CaseRecord]:
        """Non-blocking writer lease; raises WriterBusy if already held."""
        if case_id not in self.cases:
            raise NotFound(f"unknown case {case_id!r}")
        lock = self._lock_for(case_id)
        if not lock.acquire(blocking=False):
            raise WriterBusy(f"case {case_id} has a mutation in flight")
        try:
            yield self.cases[case_id]
        finally:
            lock.release()

    def _persist(self, record: CaseRecord) -> None:
        """Durably append new audit entries and snapshot the case."""
        done = self._persisted_entries.get(record.case_id, 0)
        self.audit.append_batch(record.audit_entries[done:])
        self._persisted_entries[record.case_id] = len(record.audit_entries)
        self.store.save(record)

    # -- read endpoints ------------------------------------------------------

    def health(self) -> dict:
        return {
            "status": "ok",
            "model_loaded": self.network is not None,
            "subjects": len(self.subjects),
            "cases": len(self.cases),
        }

    def list_subjects(self) -> list[dict]:
        out = []
        for sid in sorted(self.subjects):
            data = self.subjects[sid]
            label = data.recording.cohort_label
            out.append({
                "subject_id": sid,
                "label": None if label is None else label.label,
                "n_samples": len(data.recording),
                "duration_s": data.recording.duration_s,
                "window_count": len(data.windows),
            })
        return out

    def _subject(self, subject_id: str) -> _SubjectData:
        if subject_id not in self.subjects:
            raise NotFound(f"unknown subject {subject_id!r}")
        return self.subjects[subject_id]

    def _window(self, subject_id: str, index: int) -> Window:
        data = self._subject(subject_id)
        if not 0 <= index < len(data.windows):
            raise NotFound(f"subject {subject_id!r} has no window {index}")
        return data.windows[index]

    def get_window_view(self, subject_id: str, index: int,
                        channels: list[str] | None = None) -> dict:
        data = self._subject(subject_id)
        window = self._window(subject_id, index)
        names = channels if channels else ["total_left", "total_right"]
        for name in names:
            if name not in CHANNEL_NAMES:
                raise NotFound(f"unknown channel {name!r}")
        lo, hi = window.start_frame, window.start_frame + WINDOW_FRAMES
        series = {name: data.recording.channel(name)[lo:hi].tolist() for name in names}

        markers = {}
        phases = {}
        for foot in ("left", "right"):
            force = data.recording.channel(f"total_{foot}")[lo:hi]
            markers[foot] = detect_heel_strikes(force).tolist()
            phases[foot] = _phase_intervals(force)
        metrics = window_gait_metrics(window)
        return {
            "subject_id": subject_id,
            "window_index": index,
            "start_frame": lo,
            "frames": WINDOW_FRAMES,
            "sample_rate_hz": SAMPLE_RATE_HZ,
            "label": None if window.label is None else window.label.label,
            "channels": series,
            "heel_strikes": markers,
            "phases": phases,
            "metrics": _metrics_dict(metrics),
        }

    def get_case(self, case_id: str) -> dict:
        if case_id not in self.cases:
            raise NotFound(f"unknown case {case_id!r}")
        return self.cases[case_id].to_dict()

    def list_cases(self) -> list[dict]:
        out = []
        for cid in sorted(self.cases):
            rec = self.cases[cid]
            out.append({
                "case_id": cid,
                "state": rec.state.value,
                "subject_id": rec.window_ref.get("subject_id"),
                "window_index": rec.window_ref.get("window_index"),
                "predicted_class": rec.prediction.predicted_class.label,
                "alert": rec.discrepancy.alert,
                "final_label": None if rec.final_label is None else rec.final_label.label,
            })
        return out

    def get_audit(self, case_id: str) -> dict:
        if case_id not in self.cases:
            raise NotFound(f"unknown case {case_id!r}")
        entries = []
        for line in self.audit.read_lines():
            obj = json.loads(line)
            if obj.get("case_id") == case_id:
                entries.append(obj)
        entries.sort(key=lambda e: e["seq"])
        parsed = [AuditEntry(**obj) for obj in entries]
        return {"case_id": case_id, "entries": entries,
                "verified": verify_entries(parsed)}

    # -- mutating endpoints ----------------------------------------------------

    def post_predict(self, subject_id: str, window_index: int,
                     actor: str = "system") -> dict:
        if self.network is None:
            raise ModelNotLoaded("no checkpoint is loaded")
        window = self._window(subject_id, window_index)
        model_input = (standardize_window(window)
                       if self.config.standardize_inputs else window)
        pair = explanation_pair(self.network, model_input)
        report = compute_discrepancy(
            pair.gradcam, pair.lrp,
            threshold=self.config.xmed.threshold,
            merge_gap=self.config.xmed.merge_gap,
            alert_threshold_pct=self.config.xmed.alert_pct,
        )
        record = create_case(
            window_ref={"subject_id": subject_id, "window_index": window_index,
                        "start_frame": window.start_frame},
            prediction=pair.prediction,
            discrepancy=report,
            gait_metrics=window_gait_metrics(window),
            explanations={
                "gradcam": pair.gradcam.values.tolist(),
                "lrp": pair.lrp.values.tolist(),
                "target_class": pair.gradcam.target_class.label,
            },
            actor=actor,
        )
        open_review(record, actor=actor)
        auto_error = None
        if report.alert and self.auto_adjudicate_enabled():
            try:
                self._adjudicate_locked(record, actor="auto")
            except Exception as exc:
                auto_error = f"{type(exc).__name__}: {exc}"
        self.cases[record.case_id] = record
        self._persist(record)
        payload = record.to_dict()
        if auto_error is not None:
            payload["auto_adjudication_error"] = auto_error
        return payload

    def auto_adjudicate_enabled(self) -> bool:
        return self.config.auto_adjudicate_on_alert

    def post_contest(self, case_id: str, kind: str, free_text: str,
                     author: str = "clinician") -> dict:
        with self.case_lease(case_id) as record:
            contestation = Contestation(
                kind=_parse_kind(kind), free_text=free_text, author=author)
            contest(record, contestation)
            self._persist(record)
            return record.to_dict()

    def post_adjudicate(self, case_id: str, actor: str = "adjudicator",
                        temperature: float | None = None) -> dict:
        with self.case_lease(case_id) as record:
            self._adjudicate_locked(record, actor=actor, temperature=temperature)
            self._persist(record)
            return record.to_dict()

    def _adjudicate_locked(self, record: CaseRecord, actor: str,
                           temperature: float | None = None) -> AdjudicationResult:
        temp = self.config.llm.temperature if temperature is None else temperature
        with self._llm_slots:
            try:
                return adjudicate(record, self.backend, actor=actor, temperature=temp)
            finally:
                # Failed attempts also book audit entries; keep them durable.
                self._persist(record)

    def post_finalize(self, case_id: str, decision: str,
                      override_label: str | None = None,
                      actor: str = "clinician") -> dict:
        with self.case_lease(case_id) as record:
            label = None if override_label is None else Severity.from_label(override_label)
            finalize(record, actor=actor, decision=decision, override_label=label)
            self._persist(record)
            return record.to_dict()


def _parse_kind(kind: str) -> ContestationKind:
    for member in ContestationKind:
        if kind == member.value or kind == member.name:
            return member
    raise ValueError(f"unknown contestation kind {kind!r}")


def _metrics_dict(metrics) -> dict | None:
    if metrics is None:
        return None
    return {
        "mean_stride_time_s": metrics.mean_stride_time_s,
        "stance_percentage": metrics.stance_percentage,
        "swing_percentage": metrics.swing_percentage,
        "n_strides": metrics.n_strides,
    }


def _phase_intervals(force) -> list[dict]:
    """Contiguous stance/swing intervals tiling the window, inclusive ends."""
    contact = force > CONTACT_THRESHOLD_N
    intervals = []
    start = 0
    for i in range(1, len(contact)):
        if contact[i] != contact[i - 1]:
            intervals.append({"start": start, "end": i - 1,
                              "phase": "stance" if contact[i - 1] else "swing"})
            start = i
    intervals.append({"start": start, "end": len(contact) - 1,
                      "phase": "stance" if contact[-1] else "swing"})
    return intervals


class CreateCaseBody(BaseModel):
    subject_id: str
    window_index: int
    actor: str = "system"


class ContestBody(BaseModel):
    kind: str
    free_text: str
    author: str = "clinician"


class AdjudicateBody(BaseModel):
    actor: str = "adjudicator"
    temperature: float | None = None


class FinalizeBody(BaseModel):
    decision: str
    override_label: str | None = None
    actor: str = "clinician"


def create_app(service: GaitService):
    """Bind a GaitService to FastAPI routes under /v1."""
    from fastapi import FastAPI, Query, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="gaitcontest service", version="1")
    app.state.service = service

    def error(status: int, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__, "detail": str(exc)})

    from .adjudicate import (
        AlreadyFinalized,
        BackendUnavailable,
        DecisionParseFailure,
        InvalidStateTransition,
    )

    _STATUS = [
        (NotFound, 404),
        (WriterBusy, 409),
        (AlreadyFinalized, 409),
        (InvalidStateTransition, 409),
        (BackendUnavailable, 503),
        (ModelNotLoaded, 503),
        (DecisionParseFailure, 502),
        (ValueError, 422),
    ]

    @app.exception_handler(Exception)
    async def _handle(request: Request, exc: Exception):
        for etype, status in _STATUS:
            if isinstance(exc, etype):
                return error(status, exc)
        raise exc

    @app.get("/v1/health")
    def health():
        return service.health()

    @app.get("/v1/subjects")
    def subjects():
        return service.list_subjects()

    @app.get("/v1/subjects/{subject_id}/windows/{index}")
    def window_view(subject_id: str, index: int, channels: str | None = Query(None)):
        names = [c.strip() for c in channels.split(",") if c.strip()] if channels else None
        return service.get_window_view(subject_id, index, names)

    @app.get("/v1/cases")
    def cases():
        return service.list_cases()

    @app.post("/v1/cases", status_code=201)
    def create(body: CreateCaseBody):
        return service.post_predict(body.subject_id, body.window_index, actor=body.actor)

    @app.get("/v1/cases/{case_id}")
    def case(case_id: str):
        return service.get_case(case_id)

    @app.post("/v1/cases/{case_id}/contest")
    def contest_case(case_id: str, body: ContestBody):
        return service.post_contest(case_id, body.kind, body.free_text, body.author)

    @app.post("/v1/cases/{case_id}/adjudicate")
    def adjudicate_case(case_id: str, body: AdjudicateBody | None = None):
        body = body or AdjudicateBody()
        return service.post_adjudicate(case_id, actor=body.actor,
                                       temperature=body.temperature)

    @app.post("/v1/cases/{case_id}/finalize")
    def finalize_case(case_id: str, body: FinalizeBody):
        return service.post_finalize(case_id, body.decision,
                                     body.override_label, body.actor)

    @app.get("/v1/cases/{case_id}/audit")
    def audit(case_id: str):
        return service.get_audit(case_id)

    return app


def app_from_config(config_path: str | Path,
                    backend: LLMBackend | None = None):
    """Convenience factory: config file in, ASGI app out."""
    config = load_service_config(config_path)
    return create_app(GaitService(config, backend=backend))
