"""Synthetic datasets: separable sanity sets, planted-feature windows, gait waveforms.

Three generators with different jobs. Separable windows are trivially
learnable constants for smoke-testing the optimizer. Pulse windows hide the
class signal in one known time region so saliency localization can be scored
against ground truth. Waveform recordings emit full 19-column files shaped
like real force plates for exercising the parsing/training/serving path.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .severity import ALL_CLASSES, N_CLASSES, Severity
from .signal_io import SAMPLE_RATE_HZ, WINDOW_FRAMES, GaitRecording, Window

PULSE_START = 400
PULSE_END = 450  # inclusive


def make_separable_windows(
    n_per_class: int = 8,
    seed: int = 0,
    windows_per_subject: int = 4,
    noise_sigma: float = 0.01,
) -> list[Window]:
    """Windows whose class is a constant signal level k plus tiny noise."""
    rng = np.random.default_rng(seed)
    windows = []
    for cls in ALL_CLASSES:
        for i in range(n_per_class):
            subject = f"sep-{cls.value}-{i // windows_per_subject}"
            values = cls.value + noise_sigma * rng.standard_normal(WINDOW_FRAMES)
            windows.append(Window(subject, i * WINDOW_FRAMES, values, cls))
    return windows


def make_pulse_windows(
    n_per_class: int = 150,
    seed: int = 0,
    windows_per_subject: int = 5,
    baseline_sigma: float = 0.3,
    amplitude: float = 1.4,
    amplitude_sigma: float = 0.35,
    freq_base_hz: float = 2.0,
    freq_step_hz: float = 4.0,
) -> list[Window]:
    """Planted-feature windows: class is encoded only in a burst at frames 400-450.

    Each class plants a sine burst of a class-specific frequency under a Hann
    taper; outside the burst every class is identically distributed noise, so
    any faithful saliency method must concentrate there. Frequency coding
    (rather than amplitude coding) keeps the burst positive evidence for every
    class: amplitude-coded classes give the lower classes negative saliency
    and break gradient-weighted maps. Random phase plus amplitude jitter
    leaves a small error rate for discrepancy-separation experiments.
    """
    rng = np.random.default_rng(seed)
    n_pulse = PULSE_END + 1 - PULSE_START
    t = np.arange(n_pulse) / SAMPLE_RATE_HZ
    taper = np.hanning(n_pulse)
    windows = []
    for cls in ALL_CLASSES:
        freq = freq_base_hz + freq_step_hz * cls.value
        for i in range(n_per_class):
            subject = f"pulse-{cls.value}-{i // windows_per_subject}"
            values = baseline_sigma * rng.standard_normal(WINDOW_FRAMES)
            amp = amplitude * (1.0 + amplitude_sigma * rng.standard_normal())
            phase = rng.uniform(0.0, 2.0 * math.pi)
            burst = amp * np.sin(2.0 * math.pi * freq * t + phase) * taper
            values[PULSE_START:PULSE_END + 1] += burst
            windows.append(Window(subject, i * WINDOW_FRAMES, values, cls))
    return windows


# Stride period, stance fraction, period jitter, and peak force per class.
_GAIT_PROFILE = {
    Severity.HEALTHY: (1.00, 0.60, 0.015, 760.0),
    Severity.STAGE_2: (1.10, 0.63, 0.030, 720.0),
    Severity.STAGE_2_5: (1.20, 0.66, 0.045, 680.0),
    Severity.STAGE_3: (1.32, 0.70, 0.060, 640.0),
}

# Fixed share of the foot total carried by each of the eight sensors.
_SENSOR_SHARE = np.array([0.06, 0.10, 0.14, 0.17, 0.17, 0.16, 0.12, 0.08])


def _foot_force(n: int, period_s: float, stance_frac: float, jitter: float,
                peak_n: float, phase_s: float, rng: np.random.Generator) -> np.ndarray:
    """One foot's total vertical force: M-shaped stance humps, zero in swing."""
    force = np.zeros(n)
    t = -phase_s
    while t < n / SAMPLE_RATE_HZ:
        period = period_s * (1.0 + jitter * rng.standard_normal())
        stance = stance_frac * period
        start = int(math.ceil(t * SAMPLE_RATE_HZ))
        end = int(math.floor((t + stance) * SAMPLE_RATE_HZ))
        idx = np.arange(max(start, 0), min(end + 1, n))
        if idx.size:
            u = (idx / SAMPLE_RATE_HZ - t) / stance
            hump = np.sin(np.pi * u) * (1.0 - 0.3 * np.exp(-((u - 0.5) / 0.15) ** 2))
            force[idx] = peak_n * np.clip(hump, 0.0, None)
        t += period
    force += rng.normal(0.0, 2.0, size=n)
    return np.clip(force, 0.0, None)


def synth_recording(
    subject_id: str,
    severity: Severity,
    duration_s: float = 60.0,
    seed: int = 0,
) -> GaitRecording:
    """A plausible two-foot force recording with severity-dependent timing."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE_HZ))
    period, stance, jitter, peak = _GAIT_PROFILE[severity]
    total_left = _foot_force(n, period, stance, jitter, peak, 0.0, rng)
    total_right = _foot_force(n, period, stance, jitter, peak, period / 2.0, rng)
    left = _SENSOR_SHARE[:, None] * total_left[None, :]
    right = _SENSOR_SHARE[:, None] * total_right[None, :]
    return GaitRecording(
        subject_id=subject_id,
        cohort_label=severity,
        sample_rate_hz=SAMPLE_RATE_HZ,
        timestamps=np.arange(n) / SAMPLE_RATE_HZ,
        left_sensors=left,
        right_sensors=right,
        total_left=left.sum(axis=0),
        total_right=right.sum(axis=0),
    )


def write_recording_text(recording: GaitRecording, path: str | Path) -> None:
    """Write a recording as 19-column whitespace-delimited text."""
    cols = [recording.timestamps]
    cols.extend(recording.left_sensors)
    cols.extend(recording.right_sensors)
    cols.append(recording.total_left)
    cols.append(recording.total_right)
    data = np.column_stack(cols)
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in data:
            fh.write("\t".join(f"{v:.2f}" for v in row))
            fh.write("\n")


def write_synthetic_dataset(
    out_dir: str | Path,
    subjects_per_class: int = 3,
    duration_s: float = 60.0,
    seed: int = 0,
) -> list[str]:
    """Emit a directory of synthetic recordings plus the label manifest."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    subject_ids = []
    rows = ["subject_id,label"]
    counter = 0
    for cls in ALL_CLASSES:
        for i in range(subjects_per_class):
            sid = f"synth{cls.value}{i:02d}"
            rec = synth_recording(sid, cls, duration_s, seed=seed * 1000 + counter)
            write_recording_text(rec, root / f"{sid}.txt")
            rows.append(f"{sid},{cls.label}")
            subject_ids.append(sid)
            counter += 1
    (root / "manifest.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return subject_ids
