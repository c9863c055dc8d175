"""Classification scoring: confusion matrix, per-class table, averaged F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..severity import ALL_CLASSES, N_CLASSES, Severity
from ..signal_io import Window


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray,
                     n_classes: int = N_CLASSES) -> np.ndarray:
    """Counts with true class on rows and predicted class on columns."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("label arrays must have equal length")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


@dataclass(frozen=True)
class ClassStats:
    """Per-class scores; None marks a quantity with an empty denominator."""

    precision: float | None
    recall: float | None
    f1: float | None
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_class: dict[Severity, ClassStats]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    total: int


def classification_report(cm: np.ndarray) -> ClassificationReport:
    """Summarize a confusion matrix; zero-support classes report n/a stats
    and are excluded from the averages."""
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    per_class: dict[Severity, ClassStats] = {}
    rows = []
    for cls in ALL_CLASSES:
        k = cls.value
        tp = float(cm[k, k])
        if support[k] == 0:
            per_class[cls] = ClassStats(None, None, None, 0)
            continue
        precision = tp / predicted[k] if predicted[k] > 0 else 0.0
        recall = tp / support[k]
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        per_class[cls] = ClassStats(precision, recall, f1, int(support[k]))
        rows.append((precision, recall, f1, int(support[k])))

    accuracy = float(np.trace(cm)) / total
    n_present = len(rows)
    macro = [sum(r[i] for r in rows) / n_present for i in range(3)]
    weighted = [sum(r[i] * r[3] for r in rows) / total for i in range(3)]
    return ClassificationReport(
        per_class=per_class,
        accuracy=accuracy,
        macro_precision=macro[0], macro_recall=macro[1], macro_f1=macro[2],
        weighted_precision=weighted[0], weighted_recall=weighted[1], weighted_f1=weighted[2],
        total=total,
    )


def weighted_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    return classification_report(confusion_matrix(y_true, y_pred)).weighted_f1


def format_report(report: ClassificationReport) -> str:
    """Fixed-width text table with per-class rows and the three summary lines."""

    def fmt(v: float | None) -> str:
        return "   n/a" if v is None else f"{v:6.2f}"

    lines = [f"{'':<12}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>10}", ""]
    for cls, st in report.per_class.items():
        lines.append(
            f"{cls.label:<12}{fmt(st.precision):>10}{fmt(st.recall):>10}"
            f"{fmt(st.f1):>10}{st.support:>10}"
        )
    lines.append("")
    lines.append(f"{'accuracy':<12}{'':>10}{'':>10}{report.accuracy:>10.2f}{report.total:>10}")
    lines.append(
        f"{'macro avg':<12}{report.macro_precision:>10.2f}{report.macro_recall:>10.2f}"
        f"{report.macro_f1:>10.2f}{report.total:>10}"
    )
    lines.append(
        f"{'weighted avg':<12}{report.weighted_precision:>10.2f}{report.weighted_recall:>10.2f}"
        f"{report.weighted_f1:>10.2f}{report.total:>10}"
    )
    return "\n".join(lines)


def report_to_dict(report: ClassificationReport, cm: np.ndarray | None = None) -> dict:
    out: dict = {
        "accuracy": report.accuracy,
        "total": report.total,
        "macro": {"precision": report.macro_precision, "recall": report.macro_recall,
                  "f1": report.macro_f1},
        "weighted": {"precision": report.weighted_precision, "recall": report.weighted_recall,
                     "f1": report.weighted_f1},
        "classes": {
            cls.label: {"precision": st.precision, "recall": st.recall,
                        "f1": st.f1, "support": st.support}
            for cls, st in report.per_class.items()
        },
    }
    if cm is not None:
        out["confusion_matrix"] = cm.tolist()
    return out


def standardize_window(window: Window) -> Window:
    """Per-window z-score copy; the boundary convention for force-scale data.

    Must stay numerically identical to windows_to_arrays(standardize=True)
    so batch pipelines and single-window serving agree.
    """
    v = window.values
    std = max(float(v.std()), 1e-12)
    return Window(window.source_id, window.start_frame,
                  (v - float(v.mean())) / std, window.label)


def windows_to_arrays(windows, standardize: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
    """Stack windows into (N, 1, frames) inputs and an int label vector.

    Labels come back as None if any window is unlabeled. Standardization is
    a per-window z-score, guarded for near-constant windows.
    """
    xs = np.stack([w.values for w in windows]).astype(np.float64)
    if standardize:
        mean = xs.mean(axis=1, keepdims=True)
        std = xs.std(axis=1, keepdims=True)
        xs = (xs - mean) / np.maximum(std, 1e-12)
    x = xs[:, None, :]
    if any(w.label is None for w in windows):
        return x, None
    y = np.array([w.label.value for w in windows], dtype=np.int64)
    return x, y


def predict_batch(net, x: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Eval-mode logits for a stacked input, chunked to bound memory."""
    outs = []
    for i in range(0, x.shape[0], chunk):
        logits, _ = net.forward_batch(x[i:i + chunk], train=False)
        outs.append(logits)
    return np.concatenate(outs, axis=0)


def evaluate_windows(net, windows, standardize: bool = False
                     ) -> tuple[ClassificationReport, np.ndarray, np.ndarray]:
    """Score a window set; returns the report plus true and predicted labels."""
    x, y = windows_to_arrays(windows, standardize=standardize)
    if y is None:
        raise ValueError("evaluation windows must all be labeled")
    logits = predict_batch(net, x)
    y_pred = logits.argmax(axis=1)
    report = classification_report(confusion_matrix(y, y_pred))
    return report, y, y_pred
