"""Reading, windowing, and gait-event analysis of vertical ground-reaction force records.

A recording is a 19-column whitespace-delimited text file sampled at 100 Hz:
time, eight left-foot sensors, eight right-foot sensors, and the two per-foot
totals. The classifier consumes non-overlapping 1000-frame windows of one
total-force channel; gait metrics come from threshold crossings of the same
signal.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .severity import ALL_CLASSES, Severity

SAMPLE_RATE_HZ = 100.0
WINDOW_FRAMES = 1000
N_COLUMNS = 19
CONTACT_THRESHOLD_N = 20.0
DEBOUNCE_S = 0.05

SENSOR_NAMES = tuple(f"L{i}" for i in range(1, 9)) + tuple(f"R{i}" for i in range(1, 9))
CHANNEL_NAMES = ("time",) + SENSOR_NAMES + ("total_left", "total_right")

_TIME_STEP_TOL = 1e-6


class SignalError(Exception):
    """Base class for recording and windowing failures."""


class MalformedLine(SignalError):
    def __init__(self, line_number: int, detail: str):
        super().__init__(f"line {line_number}: {detail}")
        self.line_number = line_number


class NonMonotoneTime(SignalError):
    def __init__(self, line_number: int, detail: str):
        super().__init__(f"line {line_number}: {detail}")
        self.line_number = line_number


class NegativeForce(SignalError):
    def __init__(self, line_number: int, column: int):
        super().__init__(f"line {line_number}: negative force in column {column}")
        self.line_number = line_number
        self.column = column


class RecordingTooShort(SignalError):
    pass


class NoStridesDetected(SignalError):
    pass


class InsufficientSubjects(SignalError):
    pass


@dataclass
class GaitRecording:
    """One subject's force record: timestamps plus 18 force channels.

    Force arrays are float64, non-negative, and all the same length.
    Timestamps start anywhere but must advance by 1/sample_rate_hz within
    a 1e-6 tolerance.
    """

    subject_id: str
    cohort_label: Severity | None
    sample_rate_hz: float
    timestamps: np.ndarray
    left_sensors: np.ndarray   # shape (8, n)
    right_sensors: np.ndarray  # shape (8, n)
    total_left: np.ndarray
    total_right: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        n = self.timestamps.shape[0]
        if n < 1:
            raise ValueError("recording must contain at least one sample")
        for name, arr, shape in (
            ("left_sensors", self.left_sensors, (8, n)),
            ("right_sensors", self.right_sensors, (8, n)),
            ("total_left", self.total_left, (n,)),
            ("total_right", self.total_right, (n,)),
        ):
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            if np.any(arr < 0):
                raise ValueError(f"{name} contains negative force values")
        if n >= 2:
            steps = np.diff(self.timestamps)
            expected = 1.0 / self.sample_rate_hz
            bad = np.nonzero(np.abs(steps - expected) > _TIME_STEP_TOL)[0]
            if bad.size:
                i = int(bad[0])
                raise NonMonotoneTime(
                    i + 2, f"time step {steps[i]:.8f} differs from {expected:.8f}"
                )

    def __len__(self) -> int:
        return int(self.timestamps.shape[0])

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def channel(self, name: str) -> np.ndarray:
        """Return one named column ('time', 'L1'..'R8', 'total_left', 'total_right')."""
        if name == "time":
            return self.timestamps
        if name == "total_left":
            return self.total_left
        if name == "total_right":
            return self.total_right
        if name in SENSOR_NAMES:
            idx = SENSOR_NAMES.index(name)
            if idx < 8:
                return self.left_sensors[idx]
            return self.right_sensors[idx - 8]
        raise KeyError(f"unknown channel {name!r}")


@dataclass
class Window:
    """A fixed-length classifier input slice taken from one recording."""

    source_id: str
    start_frame: int
    values: np.ndarray
    label: Severity | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (WINDOW_FRAMES,):
            raise ValueError(f"window must hold {WINDOW_FRAMES} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("window contains non-finite values")
        if self.start_frame < 0:
            raise ValueError("start_frame must be non-negative")


@dataclass(frozen=True)
class GaitMetrics:
    """Stride timing and phase composition derived from heel-strike events."""

    mean_stride_time_s: float
    stance_percentage: float
    swing_percentage: float
    n_strides: int

    def __post_init__(self):
        if not math.isclose(self.stance_percentage + self.swing_percentage, 100.0,
                            rel_tol=0.0, abs_tol=1e-9):
            raise ValueError("stance and swing percentages must sum to 100")


def parse_recording(
    source: IO[str] | str | Iterable[str],
    subject_id: str = "",
    cohort_label: Severity | None = None,
    sample_rate_hz: float = SAMPLE_RATE_HZ,
) -> GaitRecording:
    """Parse 19-column force text into a validated GaitRecording.

    `source` may be an open text stream, a string of the file content, or an
    iterable of lines. Fully blank lines are skipped. Raises MalformedLine,
    NegativeForce, or NonMonotoneTime with a 1-based line number on bad input.
    """
    if isinstance(source, str):
        lines: Iterable[str] = source.splitlines()
    else:
        lines = source

    rows: list[list[float]] = []
    line_numbers: list[int] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != N_COLUMNS:
            raise MalformedLine(line_no, f"expected {N_COLUMNS} columns, got {len(tokens)}")
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            raise MalformedLine(line_no, "non-numeric field") from None
        if any(not math.isfinite(v) for v in values):
            raise MalformedLine(line_no, "non-finite field")
        for col in range(1, N_COLUMNS):
            if values[col] < 0:
                raise NegativeForce(line_no, col)
        rows.append(values)
        line_numbers.append(line_no)

    if not rows:
        raise MalformedLine(1, "empty recording")

    data = np.asarray(rows, dtype=np.float64)
    timestamps = data[:, 0]
    if timestamps.shape[0] >= 2:
        steps = np.diff(timestamps)
        expected = 1.0 / sample_rate_hz
        bad = np.nonzero(np.abs(steps - expected) > _TIME_STEP_TOL)[0]
        if bad.size:
            i = int(bad[0])
            where = line_numbers[i + 1]
            if steps[i] <= 0:
                raise NonMonotoneTime(where, f"time does not increase (step {steps[i]:.8f})")
            raise NonMonotoneTime(
                where, f"time step {steps[i]:.8f} differs from {expected:.8f}"
            )
    return GaitRecording(
        subject_id=subject_id,
        cohort_label=cohort_label,
        sample_rate_hz=sample_rate_hz,
        timestamps=timestamps,
        left_sensors=data[:, 1:9].T.copy(),
        right_sensors=data[:, 9:17].T.copy(),
        total_left=data[:, 17].copy(),
        total_right=data[:, 18].copy(),
    )


def load_recording(path: str | Path, subject_id: str | None = None,
                   cohort_label: Severity | None = None) -> GaitRecording:
    """Parse one recording file; subject id defaults to the file stem."""
    p = Path(path)
    with p.open("r", encoding="utf-8") as fh:
        return parse_recording(fh, subject_id or p.stem, cohort_label)


def load_manifest(path: str | Path) -> dict[str, Severity]:
    """Read the subject_id,label sidecar CSV; a header row is optional."""
    labels: dict[str, Severity] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            if row[0].strip().lower() == "subject_id":
                continue
            if len(row) < 2:
                raise ValueError(f"manifest row needs subject_id,label: {row!r}")
            labels[row[0].strip()] = Severity.from_label(row[1])
    return labels


def load_dataset(data_dir: str | Path, manifest_name: str = "manifest.csv") -> list[GaitRecording]:
    """Load every <subject_id>.txt recording listed in the directory manifest."""
    root = Path(data_dir)
    manifest = load_manifest(root / manifest_name)
    recordings = []
    for subject_id in sorted(manifest):
        rec_path = root / f"{subject_id}.txt"
        if not rec_path.exists():
            raise FileNotFoundError(f"manifest lists {subject_id} but {rec_path} is missing")
        recordings.append(load_recording(rec_path, subject_id, manifest[subject_id]))
    return recordings


def segment_windows(recording: GaitRecording, channel: str = "total_left") -> list[Window]:
    """Cut non-overlapping 1000-frame windows; the trailing remainder is dropped."""
    signal = recording.channel(channel)
    n = signal.shape[0]
    if n < WINDOW_FRAMES:
        raise RecordingTooShort(
            f"{recording.subject_id or 'recording'}: {n} samples < {WINDOW_FRAMES}"
        )
    windows = []
    for start in range(0, n - WINDOW_FRAMES + 1, WINDOW_FRAMES):
        windows.append(Window(
            source_id=recording.subject_id,
            start_frame=start,
            values=signal[start:start + WINDOW_FRAMES].copy(),
            label=recording.cohort_label,
        ))
    return windows


def detect_heel_strikes(
    force: np.ndarray,
    sample_rate_hz: float = SAMPLE_RATE_HZ,
    contact_threshold_n: float = CONTACT_THRESHOLD_N,
    debounce_s: float = DEBOUNCE_S,
) -> np.ndarray:
    """Indices where force rises through the contact threshold, debounced.

    A rising crossing is a sample strictly above the threshold whose
    predecessor was at or below it. Crossings closer than the debounce
    interval to the previous accepted strike are discarded.
    """
    force = np.asarray(force, dtype=np.float64)
    above = force > contact_threshold_n
    rising = np.nonzero(above[1:] & ~above[:-1])[0] + 1
    min_gap = int(round(debounce_s * sample_rate_hz))
    strikes: list[int] = []
    for idx in rising:
        if strikes and idx - strikes[-1] < min_gap:
            continue
        strikes.append(int(idx))
    return np.asarray(strikes, dtype=np.int64)


def compute_gait_metrics(
    recording: GaitRecording,
    foot: str = "left",
    contact_threshold_n: float = CONTACT_THRESHOLD_N,
    debounce_s: float = DEBOUNCE_S,
) -> GaitMetrics:
    """Stride time and stance/swing split from one foot's total force.

    The recording must span at least two seconds. Stance percentage is the
    contact fraction measured between the first and last heel strike, and
    swing is its exact complement. Raises NoStridesDetected when fewer than
    two strikes exist (constant or never-crossing signals).
    """
    if recording.duration_s < 2.0:
        raise ValueError("recording shorter than two seconds")
    if foot not in ("left", "right"):
        raise ValueError("foot must be 'left' or 'right'")
    force = recording.total_left if foot == "left" else recording.total_right
    strikes = detect_heel_strikes(force, recording.sample_rate_hz,
                                  contact_threshold_n, debounce_s)
    if strikes.shape[0] < 2:
        raise NoStridesDetected(f"found {strikes.shape[0]} heel strikes, need at least 2")
    stride_times = np.diff(strikes) / recording.sample_rate_hz
    span = force[strikes[0]:strikes[-1]]
    stance = 100.0 * float(np.mean(span > contact_threshold_n))
    return GaitMetrics(
        mean_stride_time_s=float(np.mean(stride_times)),
        stance_percentage=stance,
        swing_percentage=100.0 - stance,
        n_strides=int(stride_times.shape[0]),
    )


def window_gait_metrics(window: Window, **kwargs) -> GaitMetrics | None:
    """Gait metrics for a single window; None when no strides are detectable."""
    rec = GaitRecording(
        subject_id=window.source_id,
        cohort_label=window.label,
        sample_rate_hz=SAMPLE_RATE_HZ,
        timestamps=np.arange(WINDOW_FRAMES) / SAMPLE_RATE_HZ,
        left_sensors=np.zeros((8, WINDOW_FRAMES)),
        right_sensors=np.zeros((8, WINDOW_FRAMES)),
        total_left=window.values.copy(),
        total_right=np.zeros(WINDOW_FRAMES),
    )
    try:
        return compute_gait_metrics(rec, foot="left", **kwargs)
    except NoStridesDetected:
        return None


def _allocate(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder split of n items into len(ratios) buckets.

    Every positive-ratio bucket gets at least one item when n allows it,
    so a 3-subject class still yields a usable train/val/test division.
    """
    exact = [n * r for r in ratios]
    counts = [int(math.floor(e)) for e in exact]
    remainders = [e - c for e, c in zip(exact, counts)]
    leftover = n - sum(counts)
    # hand leftovers to the largest remainders, earlier bucket on ties
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    if n >= len(ratios):
        while any(c == 0 and r > 0 for c, r in zip(counts, ratios)):
            needy = min(i for i, c in enumerate(counts) if c == 0 and ratios[i] > 0)
            donor = max(range(len(counts)), key=lambda i: counts[i])
            counts[donor] -= 1
            counts[needy] += 1
    return counts


def split_dataset(
    windows: Sequence[Window],
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> tuple[list[Window], list[Window], list[Window]]:
    """Subject-disjoint train/val/test split, stratified by class.

    Subjects (not windows) are shuffled and allocated per class with
    largest-remainder rounding, so each split's subject count per class is
    within one of the exact proportion. Every class needs at least three
    subjects; windows of one subject never straddle splits.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")

    by_subject: dict[str, list[Window]] = {}
    subject_label: dict[str, Severity] = {}
    for w in windows:
        if w.label is None:
            raise ValueError(f"window from {w.source_id!r} has no label")
        by_subject.setdefault(w.source_id, []).append(w)
        prev = subject_label.setdefault(w.source_id, w.label)
        if prev != w.label:
            raise ValueError(f"subject {w.source_id!r} has conflicting labels")

    rng = np.random.default_rng(seed)
    splits: tuple[list[Window], list[Window], list[Window]] = ([], [], [])
    for cls in ALL_CLASSES:
        subjects = sorted(s for s, lab in subject_label.items() if lab == cls)
        if not subjects:
            continue
        if len(subjects) < 3:
            raise InsufficientSubjects(
                f"class {cls.label!r} has {len(subjects)} subjects, need at least 3"
            )
        perm = rng.permutation(len(subjects))
        shuffled = [subjects[i] for i in perm]
        counts = _allocate(len(subjects), ratios)
        pos = 0
        for split_idx, count in enumerate(counts):
            for s in shuffled[pos:pos + count]:
                splits[split_idx].extend(by_subject[s])
            pos += count
    return splits


# Binary window fixture: u32 count, then per window u32 start, u8 label, 1000 f32.
_FIXTURE_HEADER = struct.Struct("<I")
_FIXTURE_WINDOW_HEAD = struct.Struct("<IB")
_NO_LABEL = 255


def write_window_fixture(windows: Sequence[Window], dest: str | Path | IO[bytes]) -> None:
    """Serialize windows to the little-endian fixture format (values as f32)."""
    own = isinstance(dest, (str, Path))
    fh: IO[bytes] = open(dest, "wb") if own else dest  # type: ignore[arg-type]
    try:
        fh.write(_FIXTURE_HEADER.pack(len(windows)))
        for w in windows:
            code = _NO_LABEL if w.label is None else w.label.value
            fh.write(_FIXTURE_WINDOW_HEAD.pack(w.start_frame, code))
            fh.write(np.asarray(w.values, dtype="<f4").tobytes())
    finally:
        if own:
            fh.close()


def read_window_fixture(src: str | Path | IO[bytes]) -> list[Window]:
    """Read windows written by write_window_fixture.

    Values come back as float64 upcasts of the stored f32; source ids are
    synthesized as 'fixture:<index>' because the format does not keep them.
    """
    own = isinstance(src, (str, Path))
    fh: IO[bytes] = open(src, "rb") if own else src  # type: ignore[arg-type]
    try:
        head = fh.read(_FIXTURE_HEADER.size)
        if len(head) < _FIXTURE_HEADER.size:
            raise SignalError("fixture truncated in header")
        (count,) = _FIXTURE_HEADER.unpack(head)
        windows = []
        for i in range(count):
            meta = fh.read(_FIXTURE_WINDOW_HEAD.size)
            payload = fh.read(4 * WINDOW_FRAMES)
            if len(meta) < _FIXTURE_WINDOW_HEAD.size or len(payload) < 4 * WINDOW_FRAMES:
                raise SignalError(f"fixture truncated in window {i}")
            start, code = _FIXTURE_WINDOW_HEAD.unpack(meta)
            label = None if code == _NO_LABEL else Severity(code)
            values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
            windows.append(Window(f"fixture:{i}", start, values, label))
        return windows
    finally:
        if own:
            fh.close()
